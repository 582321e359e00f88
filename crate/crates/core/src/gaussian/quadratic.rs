use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::margins::MarginSpec;
use crate::typical::{weight, Layout, TypicalTable};

/// Largest dense `Q` dimension accepted by the dense paths.
pub const MAX_DENSE_DIM: usize = 20_000;

/// Group-compressed `Q` for a block typical table.
///
/// Variables are the row potentials followed by the column potentials with
/// the last column dropped, so the column group holding that column has one
/// fewer variable than columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockQ {
    pub row_counts: Vec<usize>,
    /// Column counts after dropping the last column.
    pub col_counts: Vec<usize>,
    /// Diagonal value of each row group.
    pub row_diag: Vec<f64>,
    /// Diagonal value of each column group.
    pub col_diag: Vec<f64>,
    /// Cross value `z^2 + z` for each (row group, column group).
    pub cross: Vec<Vec<f64>>,
    row_group: Vec<usize>,
    col_group: Vec<usize>,
}

impl BlockQ {
    pub fn row_group_of(&self, i: usize) -> usize {
        self.row_group[i]
    }

    pub fn col_group_of(&self, j: usize) -> usize {
        self.col_group[j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QLayout {
    Dense(DMatrix<f64>),
    Block(BlockQ),
}

/// The `(m+n-1)`-square matrix of the quadratic form
/// `q(s, t) = 1/2 sum_jk (z_jk^2 + z_jk)(s_j + t_k)^2` in the coordinates
/// `(s_1..s_m, t_1..t_{n-1})` with `t_n = 0`, scaled so that `q = x^T Q x / 2`.
///
/// The null direction `(1,..,1,-1,..,-1)` of the unreduced form is removed by
/// pinning `t_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    m: usize,
    n: usize,
    layout: QLayout,
}

/// Builds `Q`: cross entries `z_jk^2 + z_jk`, row diagonals `sum_k (z_jk + z_jk^2)`,
/// column diagonals `sum_j (z_jk + z_jk^2)` for all but the last column.
pub fn assemble_q(table: &TypicalTable, spec: &MarginSpec) -> Result<QuadraticModel> {
    let (m, n) = (table.m(), table.n());
    if m != spec.m() || n != spec.n() {
        return Err(Error::DimensionMismatch(format!(
            "table is {m}x{n}, margins are {}x{}",
            spec.m(),
            spec.n()
        )));
    }
    if m + n < 2 {
        return Err(Error::DimensionMismatch("need m + n >= 2".into()));
    }
    let layout = match table.layout() {
        Layout::Dense(z) => {
            let d = m + n - 1;
            let mut q = DMatrix::<f64>::zeros(d, d);
            for j in 0..m {
                for k in 0..n {
                    let w = weight(z[(j, k)]);
                    q[(j, j)] += w;
                    if k + 1 < n {
                        q[(m + k, m + k)] += w;
                        q[(j, m + k)] = w;
                        q[(m + k, j)] = w;
                    }
                }
            }
            QLayout::Dense(q)
        }
        Layout::Block(b) => {
            let l = b.layout();
            let (gr, gc) = (l.row_groups(), l.col_groups());
            let cross: Vec<Vec<f64>> = (0..gr)
                .map(|g| (0..gc).map(|h| weight(b.value(g, h))).collect())
                .collect();
            let row_diag = (0..gr)
                .map(|g| (0..gc).map(|h| l.col_counts()[h] as f64 * cross[g][h]).sum())
                .collect();
            let col_diag = (0..gc)
                .map(|h| (0..gr).map(|g| l.row_counts()[g] as f64 * cross[g][h]).sum())
                .collect();
            let mut col_counts = l.col_counts().to_vec();
            col_counts[l.last_col_group()] -= 1;
            QLayout::Block(BlockQ {
                row_counts: l.row_counts().to_vec(),
                col_counts,
                row_diag,
                col_diag,
                cross,
                row_group: (0..m).map(|i| l.row_group_of(i)).collect(),
                col_group: (0..n).map(|j| l.col_group_of(j)).collect(),
            })
        }
    };
    Ok(QuadraticModel { m, n, layout })
}

impl QuadraticModel {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m + self.n - 1
    }

    pub fn layout(&self) -> &QLayout {
        &self.layout
    }

    pub fn as_block(&self) -> Option<&BlockQ> {
        match &self.layout {
            QLayout::Block(b) => Some(b),
            QLayout::Dense(_) => None,
        }
    }

    /// Dense `Q`, expanding the block form if needed.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let d = self.dim();
        if d > MAX_DENSE_DIM {
            return Err(Error::TooLarge(format!("dense Q of dimension {d}")));
        }
        Ok(match &self.layout {
            QLayout::Dense(q) => q.clone(),
            QLayout::Block(b) => {
                let m = self.m;
                DMatrix::from_fn(d, d, |a, c| {
                    let row_a = a < m;
                    let row_c = c < m;
                    match (row_a, row_c) {
                        (true, true) => {
                            if a == c {
                                b.row_diag[b.row_group[a]]
                            } else {
                                0.0
                            }
                        }
                        (false, false) => {
                            if a == c {
                                b.col_diag[b.col_group[a - m]]
                            } else {
                                0.0
                            }
                        }
                        (true, false) => b.cross[b.row_group[a]][b.col_group[c - m]],
                        (false, true) => b.cross[b.row_group[c]][b.col_group[a - m]],
                    }
                })
            }
        })
    }

    /// Full `(m+n)`-square Hessian of `q` over `(s, t)` without pinning `t_n`.
    pub fn full_hessian(&self, table: &TypicalTable) -> Result<DMatrix<f64>> {
        let (m, n) = (self.m, self.n);
        if m + n > MAX_DENSE_DIM {
            return Err(Error::TooLarge(format!("dense form of dimension {}", m + n)));
        }
        let mut h = DMatrix::<f64>::zeros(m + n, m + n);
        for j in 0..m {
            for k in 0..n {
                let w = weight(table.get(j, k));
                h[(j, j)] += w;
                h[(m + k, m + k)] += w;
                h[(j, m + k)] = w;
                h[(m + k, j)] = w;
            }
        }
        Ok(h)
    }
}

/// `ln det Q` from a Cholesky factorization.
pub fn logdet_dense(model: &QuadraticModel) -> Result<f64> {
    let q = model.to_dense()?;
    let chol = q.cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// `ln det(q|_H) = ln(m+n) + (1-m-n) ln 2 + ln det Q`, where `det(q|_H)` is the
/// product of the nonzero eigenvalues of the matrix `M` with `q(y) = y^T M y`.
pub fn det_qh_bridge(model: &QuadraticModel, logdet_q: f64) -> f64 {
    let size = (model.m + model.n) as f64;
    size.ln() + (1.0 - size) * std::f64::consts::LN_2 + logdet_q
}
