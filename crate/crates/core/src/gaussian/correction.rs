//! Second-order Gaussian correction `exp(-mu/2 + nu)`.
//!
//! With `l_jk = s_j + t_k`,
//!
//! ```text
//! f = 1/6  sum_jk z(z+1)(2z+1)        l_jk^3
//! h = 1/24 sum_jk z(z+1)(6z^2+6z+1)   l_jk^4
//! ```
//!
//! and `mu = E[f^2]`, `nu = E[h]` under the Gaussian with density
//! proportional to `exp(-q)`. In the reduced coordinates (`t_n = 0`) that
//! Gaussian has covariance `Q^{-1}`. Isserlis' theorem gives
//! `E[X^4] = 3 s^4` and `E[X^3 Y^3] = 9 s_x^2 s_y^2 s_xy + 6 s_xy^3`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gaussian::quadratic::{BlockQ, QuadraticModel};
use crate::typical::TypicalTable;

/// Largest dense dimension for the exact pairwise Wick sum.
pub const MAX_WICK_DENSE_DIM: usize = 200;

pub const MIN_MC_SAMPLES: usize = 1_000;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;

const MC_CHUNK: usize = 1024;

/// Coefficient of `l^3` in `6 f`.
pub fn cubic_coeff(z: f64) -> f64 {
    z * (z + 1.0) * (2.0 * z + 1.0)
}

/// Coefficient of `l^4` in `24 h`.
pub fn quartic_coeff(z: f64) -> f64 {
    z * (z + 1.0) * (6.0 * z * z + 6.0 * z + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMethod {
    Wick,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Reduced coordinates `t_n = 0`, covariance `Q^{-1}`.
    #[default]
    Reduced,
    /// Gaussian on the hyperplane orthogonal to `(1,..,1,-1,..,-1)`,
    /// drawn through the eigenbasis of the full form.
    Subspace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectionEstimate {
    pub mu: f64,
    pub nu: f64,
    pub correction_log: f64,
    pub method: CorrectionMethod,
    pub std_err_mu: Option<f64>,
    pub std_err_nu: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<Sampler>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_err_f: Option<f64>,
}

impl CorrectionEstimate {
    fn exact(mu: f64, nu: f64) -> Self {
        CorrectionEstimate {
            mu,
            nu,
            correction_log: -0.5 * mu + nu,
            method: CorrectionMethod::Wick,
            std_err_mu: None,
            std_err_nu: None,
            samples: None,
            seed: None,
            sampler: None,
            mean_f: None,
            std_err_f: None,
        }
    }
}

fn inverse(q: DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(q.cholesky().ok_or(Error::NotPositiveDefinite)?.inverse())
}

/// Exact `mu`, `nu` by Isserlis' theorem.
///
/// Block models use the group-compressed sum and have no size limit; dense
/// models are limited to dimension [`MAX_WICK_DENSE_DIM`].
pub fn correction_wick(table: &TypicalTable, model: &QuadraticModel) -> Result<CorrectionEstimate> {
    match (table.as_block(), model.as_block()) {
        (Some(bt), Some(bq)) => Ok(block_wick(bt, bq)),
        _ => dense_wick(table, model),
    }
}

/// Pairwise Wick sum over all cells using a dense covariance.
pub fn dense_wick(table: &TypicalTable, model: &QuadraticModel) -> Result<CorrectionEstimate> {
    let d = model.dim();
    if d > MAX_WICK_DENSE_DIM {
        return Err(Error::TooLarge(format!(
            "dense Wick sum needs dimension <= {MAX_WICK_DENSE_DIM}, got {d}"
        )));
    }
    let (m, n) = (model.m(), model.n());
    let sigma = inverse(model.to_dense()?)?;

    struct Cell {
        row: usize,
        col: Option<usize>,
        cf: f64,
        ch: f64,
    }
    let cells: Vec<Cell> = (0..m)
        .flat_map(|j| (0..n).map(move |k| (j, k)))
        .map(|(j, k)| {
            let z = table.get(j, k);
            Cell {
                row: j,
                col: (k + 1 < n).then_some(m + k),
                cf: cubic_coeff(z),
                ch: quartic_coeff(z),
            }
        })
        .collect();
    let cov = |a: &Cell, b: &Cell| {
        let mut s = sigma[(a.row, b.row)];
        if let Some(cb) = b.col {
            s += sigma[(a.row, cb)];
        }
        if let Some(ca) = a.col {
            s += sigma[(ca, b.row)];
            if let Some(cb) = b.col {
                s += sigma[(ca, cb)];
            }
        }
        s
    };
    let var: Vec<f64> = cells.iter().map(|c| cov(c, c)).collect();

    let nu = cells.iter().zip(&var).map(|(c, v)| c.ch * 3.0 * v * v).sum::<f64>() / 24.0;
    let partial: Vec<f64> = (0..cells.len())
        .into_par_iter()
        .map(|a| {
            let ca = &cells[a];
            let mut acc = 0.0;
            for (b, cb) in cells.iter().enumerate() {
                let s = cov(ca, cb);
                acc += cb.cf * (9.0 * var[a] * var[b] * s + 6.0 * s * s * s);
            }
            ca.cf * acc
        })
        .collect();
    let mu = partial.iter().sum::<f64>() / 36.0;
    Ok(CorrectionEstimate::exact(mu, nu))
}

/// Variable group in the block covariance: a row group or a reduced column group.
#[derive(Clone, Copy)]
enum Var {
    Row(usize),
    Col(usize),
}

/// Covariance structure `Sigma(x, y) = [x == y] / a_G - M[G(x)][G(y)]`,
/// from `(D + U K U^T)^{-1} = D^{-1} - D^{-1} U K (I + P K)^{-1} U^T D^{-1}`
/// with `P = U^T D^{-1} U`.
struct BlockCovariance {
    row_diag: Vec<f64>,
    col_diag: Vec<f64>,
    shared: DMatrix<f64>,
    gr: usize,
}

impl BlockCovariance {
    fn new(bq: &BlockQ) -> Self {
        let gr = bq.row_counts.len();
        let gc = bq.col_counts.len();
        let size = gr + gc;
        let mut k = DMatrix::<f64>::zeros(size, size);
        for g in 0..gr {
            for h in 0..gc {
                k[(g, gr + h)] = bq.cross[g][h];
                k[(gr + h, g)] = bq.cross[g][h];
            }
        }
        let diag: Vec<f64> = bq.row_diag.iter().chain(&bq.col_diag).copied().collect();
        let counts: Vec<f64> = bq
            .row_counts
            .iter()
            .chain(&bq.col_counts)
            .map(|&c| c as f64)
            .collect();
        let p = DMatrix::from_diagonal(&DVector::from_iterator(
            size,
            counts.iter().zip(&diag).map(|(c, a)| c / a),
        ));
        let inner = (DMatrix::identity(size, size) + &p * &k)
            .lu()
            .solve(&DMatrix::identity(size, size))
            .expect("I + PK is invertible for a positive definite Q");
        let mut shared = &k * inner;
        for a in 0..size {
            for b in 0..size {
                shared[(a, b)] /= diag[a] * diag[b];
            }
        }
        BlockCovariance {
            row_diag: bq.row_diag.clone(),
            col_diag: bq.col_diag.clone(),
            shared,
            gr,
        }
    }

    fn index(&self, v: Var) -> usize {
        match v {
            Var::Row(g) => g,
            Var::Col(h) => self.gr + h,
        }
    }

    /// Covariance of two variables, `same` when they are the same variable.
    fn get(&self, x: Var, y: Var, same: bool) -> f64 {
        let mut s = -self.shared[(self.index(x), self.index(y))];
        if same {
            s += match x {
                Var::Row(g) => 1.0 / self.row_diag[g],
                Var::Col(h) => 1.0 / self.col_diag[h],
            };
        }
        s
    }
}

/// Class of cells sharing a row group and a column class. The pinned last
/// column forms its own class with `t = 0`.
struct CellClass {
    row: usize,
    col: Option<usize>,
    /// Column class id (free groups first, then the pinned column).
    col_class: usize,
    col_count: f64,
    cf: f64,
    ch: f64,
}

fn block_wick(bt: &crate::typical::BlockTable, bq: &BlockQ) -> CorrectionEstimate {
    let cov = BlockCovariance::new(bq);
    let l = bt.layout();
    let last = l.last_col_group();
    let gr = bq.row_counts.len();
    let gc = bq.col_counts.len();

    let mut classes = Vec::new();
    for g in 0..gr {
        for h in 0..gc {
            if bq.col_counts[h] > 0 {
                classes.push(CellClass {
                    row: g,
                    col: Some(h),
                    col_class: h,
                    col_count: bq.col_counts[h] as f64,
                    cf: cubic_coeff(bt.value(g, h)),
                    ch: quartic_coeff(bt.value(g, h)),
                });
            }
        }
        classes.push(CellClass {
            row: g,
            col: None,
            col_class: gc,
            col_count: 1.0,
            cf: cubic_coeff(bt.value(g, last)),
            ch: quartic_coeff(bt.value(g, last)),
        });
    }
    let p: Vec<f64> = bq.row_counts.iter().map(|&c| c as f64).collect();

    let pair_cov = |a: &CellClass, b: &CellClass, same_row: bool, same_col: bool| {
        let mut s = cov.get(Var::Row(a.row), Var::Row(b.row), same_row);
        if let Some(hb) = b.col {
            s += cov.get(Var::Row(a.row), Var::Col(hb), false);
        }
        if let Some(ha) = a.col {
            s += cov.get(Var::Col(ha), Var::Row(b.row), false);
            if let Some(hb) = b.col {
                s += cov.get(Var::Col(ha), Var::Col(hb), same_col);
            }
        }
        s
    };
    let var: Vec<f64> = classes.iter().map(|c| pair_cov(c, c, true, true)).collect();

    let nu = classes
        .iter()
        .zip(&var)
        .map(|(c, v)| p[c.row] * c.col_count * c.ch * 3.0 * v * v)
        .sum::<f64>()
        / 24.0;

    let mut mu = 0.0;
    for (a, ca) in classes.iter().enumerate() {
        for (b, cb) in classes.iter().enumerate() {
            let row_patterns: &[(bool, f64)] = if ca.row == cb.row {
                &[(true, p[ca.row]), (false, p[ca.row] * (p[ca.row] - 1.0))]
            } else {
                &[(false, p[ca.row] * p[cb.row])]
            };
            let col_patterns: &[(bool, f64)] = if ca.col_class == cb.col_class {
                &[
                    (true, ca.col_count),
                    (false, ca.col_count * (ca.col_count - 1.0)),
                ]
            } else {
                &[(false, ca.col_count * cb.col_count)]
            };
            for &(same_row, rc) in row_patterns {
                for &(same_col, cc) in col_patterns {
                    let count = rc * cc;
                    if count == 0.0 {
                        continue;
                    }
                    let s = pair_cov(ca, cb, same_row, same_col);
                    mu += count * ca.cf * cb.cf * (9.0 * var[a] * var[b] * s + 6.0 * s * s * s);
                }
            }
        }
    }
    CorrectionEstimate::exact(mu / 36.0, nu)
}

/// Draws `l_jk` for one sample.
trait LinearFormSampler: Sync {
    fn dim(&self) -> usize;
    /// Maps a standard normal vector to `(s, t)` with `t` of length `n`.
    fn transform(&self, normal: &DVector<f64>) -> (Vec<f64>, Vec<f64>);
}

struct ReducedSampler {
    upper: DMatrix<f64>,
    m: usize,
    n: usize,
}

impl LinearFormSampler for ReducedSampler {
    fn dim(&self) -> usize {
        self.upper.nrows()
    }

    fn transform(&self, normal: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        // Solve L^T x = z, so Cov(x) = (L L^T)^{-1} = Q^{-1}.
        let x = self
            .upper
            .solve_upper_triangular(normal)
            .expect("Cholesky factor has a positive diagonal");
        let s = x.rows(0, self.m).iter().copied().collect();
        let mut t: Vec<f64> = x.rows(self.m, self.n - 1).iter().copied().collect();
        t.push(0.0);
        (s, t)
    }
}

struct SubspaceSampler {
    /// Columns `v_i / sqrt(lambda_i)` for the nonzero eigenpairs.
    basis: DMatrix<f64>,
    m: usize,
}

impl LinearFormSampler for SubspaceSampler {
    fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn transform(&self, normal: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let y = &self.basis * normal;
        let s = y.rows(0, self.m).iter().copied().collect();
        let t = y.rows(self.m, y.len() - self.m).iter().copied().collect();
        (s, t)
    }
}

#[derive(Default, Clone, Copy)]
struct Moments {
    f: f64,
    f2: f64,
    f4: f64,
    h: f64,
    h2: f64,
}

impl Moments {
    fn add(&mut self, o: &Moments) {
        self.f += o.f;
        self.f2 += o.f2;
        self.f4 += o.f4;
        self.h += o.h;
        self.h2 += o.h2;
    }
}

/// Monte Carlo estimate of `mu`, `nu`.
///
/// Sample `i` is drawn from a ChaCha8 stream keyed by `(seed, i)` and samples
/// are accumulated in fixed chunks, so results do not depend on threading.
pub fn correction_mc(
    table: &TypicalTable,
    model: &QuadraticModel,
    samples: usize,
    seed: u64,
    sampler: Sampler,
) -> Result<CorrectionEstimate> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidParams(format!(
            "Monte Carlo needs at least {MIN_MC_SAMPLES} samples, got {samples}"
        )));
    }
    let (m, n) = (model.m(), model.n());
    let dense_z = table.to_dense();
    let cf = dense_z.map(cubic_coeff);
    let ch = dense_z.map(quartic_coeff);

    let draw: Box<dyn LinearFormSampler> = match sampler {
        Sampler::Reduced => {
            let chol = model.to_dense()?.cholesky().ok_or(Error::NotPositiveDefinite)?;
            Box::new(ReducedSampler {
                upper: chol.l().transpose(),
                m,
                n,
            })
        }
        Sampler::Subspace => {
            // q(y) = y^T H y / 2 with H the full Hessian; covariance H^+ on the hyperplane.
            let hess = model.full_hessian(table)?;
            let eig = SymmetricEigen::new(hess);
            let mut order: Vec<usize> = (0..m + n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let kept = &order[1..];
            if eig.eigenvalues[kept[0]] <= 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
            let basis = DMatrix::from_fn(m + n, kept.len(), |r, c| {
                eig.eigenvectors[(r, kept[c])] / eig.eigenvalues[kept[c]].sqrt()
            });
            Box::new(SubspaceSampler { basis, m })
        }
    };

    let evaluate = |index: usize| -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let normal = DVector::from_fn(draw.dim(), |_, _| StandardNormal.sample(&mut rng));
        let (s, t) = draw.transform(&normal);
        let (mut f, mut h) = (0.0, 0.0);
        for j in 0..m {
            for k in 0..n {
                let l = s[j] + t[k];
                let l2 = l * l;
                f += cf[(j, k)] * l2 * l;
                h += ch[(j, k)] * l2 * l2;
            }
        }
        (f / 6.0, h / 24.0)
    };

    let chunks = samples.div_ceil(MC_CHUNK);
    let partial: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::default();
            for i in c * MC_CHUNK..((c + 1) * MC_CHUNK).min(samples) {
                let (f, h) = evaluate(i);
                let f2 = f * f;
                acc.add(&Moments {
                    f,
                    f2,
                    f4: f2 * f2,
                    h,
                    h2: h * h,
                });
            }
            acc
        })
        .collect();
    let mut total = Moments::default();
    for p in &partial {
        total.add(p);
    }

    let count = samples as f64;
    let std_err = |sum: f64, sum_sq: f64| {
        let mean = sum / count;
        let var = ((sum_sq / count - mean * mean) * count / (count - 1.0)).max(0.0);
        (mean, (var / count).sqrt())
    };
    let (mu, se_mu) = std_err(total.f2, total.f4);
    let (nu, se_nu) = std_err(total.h, total.h2);
    let (mean_f, se_f) = std_err(total.f, total.f2);
    Ok(CorrectionEstimate {
        mu,
        nu,
        correction_log: -0.5 * mu + nu,
        method: CorrectionMethod::MonteCarlo,
        std_err_mu: Some(se_mu),
        std_err_nu: Some(se_nu),
        samples: Some(samples),
        seed: Some(seed),
        sampler: Some(sampler),
        mean_f: Some(mean_f),
        std_err_f: Some(se_f),
    })
}

/// `f` and `h` at a point `(s, t)` of the full coordinate space.
pub fn eval_polynomials(table: &TypicalTable, s: &[f64], t: &[f64]) -> (f64, f64) {
    let (mut f, mut h) = (0.0, 0.0);
    for (j, sj) in s.iter().enumerate() {
        for (k, tk) in t.iter().enumerate() {
            let z = table.get(j, k);
            let l = sj + tk;
            f += cubic_coeff(z) * l.powi(3);
            h += quartic_coeff(z) * l.powi(4);
        }
    }
    (f / 6.0, h / 24.0)
}
