//! Maximum-entropy (typical) tables.
//!
//! The typical table maximizes `g(Z) = sum (z+1)ln(z+1) - z ln z` over
//! non-negative real matrices with the prescribed margins. Its entries have
//! the form `z_ij = 1/(exp(lambda_i + tau_j) - 1)` for dual potentials
//! `lambda`, `tau`, which minimize the convex function
//!
//! ```text
//! F(lambda, tau) = sum_i r_i lambda_i + sum_j c_j tau_j - sum_ij ln(1 - exp(-lambda_i - tau_j))
//! ```
//!
//! Two solvers are provided: a dense coordinate-descent solver over all
//! potentials and a block solver for margins with at most two distinct values
//! per side, which works on one potential per group.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::margins::{FamilyParams, MarginSpec};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Largest dense table the solver will allocate.
pub const MAX_DENSE_ENTRIES: usize = 400_000_000;

/// `1/(exp(x) - 1)`.
#[inline]
pub(crate) fn entry_from_potential(x: f64) -> f64 {
    1.0 / x.exp_m1()
}

/// `z^2 + z`, the curvature weight of a cell.
#[inline]
pub(crate) fn weight(z: f64) -> f64 {
    z * z + z
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Grouping of equal margins, at most two groups per side.
///
/// Groups are ordered by decreasing margin value, so group 0 is the heavy one.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    row_group: Vec<usize>,
    col_group: Vec<usize>,
    row_counts: Vec<usize>,
    col_counts: Vec<usize>,
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
}

fn group_values(values: &[f64], side: &str) -> Result<(Vec<usize>, Vec<usize>, Vec<f64>)> {
    let mut distinct: Vec<f64> = Vec::new();
    for &v in values {
        if !distinct.iter().any(|&d| same_margin(d, v)) {
            distinct.push(v);
        }
    }
    if distinct.len() > 2 {
        return Err(Error::NotBlock(format!(
            "{side} margins take {} distinct values",
            distinct.len()
        )));
    }
    distinct.sort_by(|a, b| b.total_cmp(a));
    let mut counts = vec![0; distinct.len()];
    let group = values
        .iter()
        .map(|&v| {
            let g = distinct.iter().position(|&d| same_margin(d, v)).unwrap();
            counts[g] += 1;
            g
        })
        .collect();
    Ok((group, counts, distinct))
}

fn same_margin(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

impl BlockLayout {
    pub fn detect(spec: &MarginSpec) -> Result<Self> {
        let (row_group, row_counts, row_sums) = group_values(spec.rows(), "row")?;
        let (col_group, col_counts, col_sums) = group_values(spec.cols(), "column")?;
        Ok(BlockLayout {
            row_group,
            col_group,
            row_counts,
            col_counts,
            row_sums,
            col_sums,
        })
    }

    pub fn row_groups(&self) -> usize {
        self.row_counts.len()
    }

    pub fn col_groups(&self) -> usize {
        self.col_counts.len()
    }

    pub fn row_group_of(&self, i: usize) -> usize {
        self.row_group[i]
    }

    pub fn col_group_of(&self, j: usize) -> usize {
        self.col_group[j]
    }

    pub fn row_counts(&self) -> &[usize] {
        &self.row_counts
    }

    pub fn col_counts(&self) -> &[usize] {
        &self.col_counts
    }

    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[f64] {
        &self.col_sums
    }

    pub fn m(&self) -> usize {
        self.row_group.len()
    }

    pub fn n(&self) -> usize {
        self.col_group.len()
    }

    /// Group of the last column, whose potential is pinned to zero.
    pub fn last_col_group(&self) -> usize {
        *self.col_group.last().unwrap()
    }
}

/// Block-constant typical table: `values[g][h]` is the entry shared by every
/// cell in row group `g` and column group `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTable {
    layout: BlockLayout,
    values: Vec<Vec<f64>>,
}

impl BlockTable {
    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn value(&self, g: usize, h: usize) -> f64 {
        self.values[g][h]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Heavy-by-heavy block value.
    pub fn z_hh(&self) -> f64 {
        self.values[0][0]
    }

    pub fn z_hl(&self) -> Option<f64> {
        self.values[0].get(1).copied()
    }

    pub fn z_lh(&self) -> Option<f64> {
        self.values.get(1).map(|r| r[0])
    }

    pub fn z_ll(&self) -> Option<f64> {
        self.values.get(1).and_then(|r| r.get(1)).copied()
    }

    /// Entry of the light rows when the columns form a single group.
    pub fn z_light(&self) -> Option<f64> {
        self.z_ll().or(self.z_lh())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Dense(DMatrix<f64>),
    Block(BlockTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypicalTable {
    layout: Layout,
    residual: f64,
}

/// Dual potentials with the gauge `tau_last = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualCertificate {
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
}

impl DualCertificate {
    /// Rebuilds the table `1/(exp(lambda_i + tau_j) - 1)`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.row_potentials.len(), self.col_potentials.len(), |i, j| {
            entry_from_potential(self.row_potentials[i] + self.col_potentials[j])
        })
    }

    pub fn is_feasible(&self) -> bool {
        let min_row = self.row_potentials.iter().copied().fold(f64::INFINITY, f64::min);
        let min_col = self.col_potentials.iter().copied().fold(f64::INFINITY, f64::min);
        min_row + min_col > 0.0
    }

    /// Shifts to the gauge `tau_last = 0`.
    fn normalize(&mut self) {
        let shift = *self.col_potentials.last().unwrap();
        self.row_potentials.iter_mut().for_each(|l| *l += shift);
        self.col_potentials.iter_mut().for_each(|t| *t -= shift);
    }
}

impl TypicalTable {
    pub fn from_dense(z: DMatrix<f64>, spec: &MarginSpec) -> Self {
        let mut table = TypicalTable {
            layout: Layout::Dense(z),
            residual: 0.0,
        };
        table.residual = table.margin_residual(spec);
        table
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn as_block(&self) -> Option<&BlockTable> {
        match &self.layout {
            Layout::Block(b) => Some(b),
            Layout::Dense(_) => None,
        }
    }

    /// Max absolute row/column sum error at solve time.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn m(&self) -> usize {
        match &self.layout {
            Layout::Dense(z) => z.nrows(),
            Layout::Block(b) => b.layout.m(),
        }
    }

    pub fn n(&self) -> usize {
        match &self.layout {
            Layout::Dense(z) => z.ncols(),
            Layout::Block(b) => b.layout.n(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.layout {
            Layout::Dense(z) => z[(i, j)],
            Layout::Block(b) => b.values[b.layout.row_group[i]][b.layout.col_group[j]],
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.layout {
            Layout::Dense(z) => z.clone(),
            Layout::Block(_) => DMatrix::from_fn(self.m(), self.n(), |i, j| self.get(i, j)),
        }
    }

    pub fn entry_range(&self) -> (f64, f64) {
        let fold = |it: &mut dyn Iterator<Item = f64>| {
            it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        match &self.layout {
            Layout::Dense(z) => fold(&mut z.iter().copied()),
            Layout::Block(b) => fold(&mut b.values.iter().flatten().copied()),
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        match &self.layout {
            Layout::Dense(z) => z.row_iter().map(|r| r.sum()).collect(),
            Layout::Block(b) => {
                let l = &b.layout;
                let per_group: Vec<f64> = (0..l.row_groups())
                    .map(|g| (0..l.col_groups()).map(|h| l.col_counts[h] as f64 * b.values[g][h]).sum())
                    .collect();
                l.row_group.iter().map(|&g| per_group[g]).collect()
            }
        }
    }

    pub fn col_sums(&self) -> Vec<f64> {
        match &self.layout {
            Layout::Dense(z) => z.column_iter().map(|c| c.sum()).collect(),
            Layout::Block(b) => {
                let l = &b.layout;
                let per_group: Vec<f64> = (0..l.col_groups())
                    .map(|h| (0..l.row_groups()).map(|g| l.row_counts[g] as f64 * b.values[g][h]).sum())
                    .collect();
                l.col_group.iter().map(|&h| per_group[h]).collect()
            }
        }
    }

    /// Max absolute deviation of the table's row and column sums from `spec`.
    pub fn margin_residual(&self, spec: &MarginSpec) -> f64 {
        let rows = self.row_sums();
        let cols = self.col_sums();
        rows.iter()
            .zip(spec.rows())
            .chain(cols.iter().zip(spec.cols()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_block_export(&self) -> Option<BlockExport> {
        let b = self.as_block()?;
        let l = &b.layout;
        Some(BlockExport {
            z_hh: b.z_hh(),
            z_hl: b.z_hl(),
            z_lh: b.z_lh(),
            z_ll: b.z_ll(),
            n_heavy: l.row_counts[0],
            n_light: l.row_counts.get(1).copied().unwrap_or(0),
            n_heavy_cols: l.col_counts[0],
            n_light_cols: l.col_counts.get(1).copied().unwrap_or(0),
            residual: self.residual,
        })
    }

    /// Dense export: one CSV line per row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record((1..=self.n()).map(|j| format!("col_{j}")))?;
        for i in 0..self.m() {
            w.write_record((0..self.n()).map(|j| format!("{:.17e}", self.get(i, j))))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// JSON block form of a typical table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockExport {
    pub z_hh: f64,
    pub z_hl: Option<f64>,
    pub z_lh: Option<f64>,
    pub z_ll: Option<f64>,
    pub n_heavy: usize,
    pub n_light: usize,
    pub n_heavy_cols: usize,
    pub n_light_cols: usize,
    pub residual: f64,
}

/// Solves `sum_k mult_k / (exp(x + offsets_k) - 1) = target` for `x`.
///
/// The left side is convex and strictly decreasing on `x > -min(offsets)`,
/// so Newton is run inside a maintained bracket with bisection as fallback.
fn solve_potential(offsets: &[f64], mult: &[f64], target: f64, start: f64) -> f64 {
    let floor = -offsets.iter().copied().fold(f64::INFINITY, f64::min);
    let eval = |x: f64| {
        let mut value = -target;
        let mut slope = 0.0;
        for (&o, &w) in offsets.iter().zip(mult) {
            let z = entry_from_potential(x + o);
            value += w * z;
            slope -= w * weight(z);
        }
        (value, slope)
    };

    let mut x = if start > floor { start } else { floor + 1.0 };
    let (mut lo, mut hi);
    let (mut value, mut slope) = eval(x);
    if value > 0.0 {
        lo = x;
        let mut step = 1.0_f64.max(x.abs());
        loop {
            let (v, _) = eval(x + step);
            if v <= 0.0 {
                hi = x + step;
                break;
            }
            lo = x + step;
            step *= 2.0;
        }
    } else {
        hi = x;
        let mut gap = x - floor;
        loop {
            gap *= 0.5;
            let (v, _) = eval(floor + gap);
            if v > 0.0 || gap < f64::MIN_POSITIVE {
                lo = floor + gap;
                break;
            }
            hi = floor + gap;
        }
    }
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
        (value, slope) = eval(x);
    }

    for _ in 0..200 {
        if value == 0.0 {
            break;
        }
        if value > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - value / slope;
        let next = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            x = next;
            break;
        }
        x = next;
        (value, slope) = eval(x);
    }
    x
}

/// Dense solver: alternating exact row and column potential updates.
pub fn solve_typical(spec: &MarginSpec, opts: SolverOptions) -> Result<(TypicalTable, DualCertificate)> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let diag = spec.validate();
    if !diag.balanced {
        return Err(Error::Imbalanced {
            residual: diag.balance_residual,
        });
    }
    let (m, n) = (spec.m(), spec.n());
    if m.saturating_mul(n) > MAX_DENSE_ENTRIES {
        return Err(Error::TooLarge(format!("{m}x{n} table")));
    }

    let init = 0.5 * (1.0 + (m * n) as f64 / spec.total()).ln();
    let mut lambda = vec![init; m];
    let mut tau = vec![init; n];
    let ones_m = vec![1.0; m];
    let ones_n = vec![1.0; n];
    let mut z = DMatrix::<f64>::zeros(m, n);
    let mut residual = f64::INFINITY;

    for _sweep in 0..opts.max_iter {
        for (l, &r) in lambda.iter_mut().zip(spec.rows()) {
            *l = solve_potential(&tau, &ones_n, r, *l);
        }
        for (t, &c) in tau.iter_mut().zip(spec.cols()) {
            *t = solve_potential(&lambda, &ones_m, c, *t);
        }
        for j in 0..n {
            for i in 0..m {
                z[(i, j)] = entry_from_potential(lambda[i] + tau[j]);
            }
        }
        let row_err = z
            .row_iter()
            .zip(spec.rows())
            .map(|(r, &target)| (r.sum() - target).abs())
            .fold(0.0, f64::max);
        let col_err = z
            .column_iter()
            .zip(spec.cols())
            .map(|(c, &target)| (c.sum() - target).abs())
            .fold(0.0, f64::max);
        residual = row_err.max(col_err);
        if residual <= opts.tol {
            let mut cert = DualCertificate {
                row_potentials: lambda,
                col_potentials: tau,
            };
            cert.normalize();
            let table = TypicalTable {
                layout: Layout::Dense(z),
                residual,
            };
            return Ok((table, cert));
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Block solver for margins taking at most two values per side.
///
/// When one side is uniform the table is constant along it and follows
/// directly from the other side's margins. Otherwise a damped Newton method
/// runs on one potential per group.
pub fn solve_block_typical(spec: &MarginSpec, tol: f64) -> Result<(TypicalTable, DualCertificate)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let diag = spec.validate();
    if !diag.balanced {
        return Err(Error::Imbalanced {
            residual: diag.balance_residual,
        });
    }
    let layout = BlockLayout::detect(spec)?;
    let (gr, gc) = (layout.row_groups(), layout.col_groups());

    let (values, lambda_g, tau_g) = if gc == 1 {
        // Equal column sums: z_ij = r_i / n.
        let n = layout.n() as f64;
        let values: Vec<Vec<f64>> = layout.row_sums.iter().map(|&r| vec![r / n]).collect();
        let lambda = values.iter().map(|v| (1.0 / v[0]).ln_1p()).collect();
        (values, lambda, vec![0.0])
    } else if gr == 1 {
        let m = layout.m() as f64;
        let values = vec![layout.col_sums.iter().map(|&c| c / m).collect::<Vec<_>>()];
        let tau_raw: Vec<f64> = values[0].iter().map(|&z| (1.0 / z).ln_1p()).collect();
        let last = tau_raw[layout.last_col_group()];
        let tau = tau_raw.iter().map(|t| t - last).collect();
        (values, vec![last], tau)
    } else {
        block_newton(&layout, spec.total(), tol)?
    };

    let cert = DualCertificate {
        row_potentials: layout.row_group.iter().map(|&g| lambda_g[g]).collect(),
        col_potentials: layout.col_group.iter().map(|&h| tau_g[h]).collect(),
    };
    let mut table = TypicalTable {
        layout: Layout::Block(BlockTable { layout, values }),
        residual: 0.0,
    };
    table.residual = table.margin_residual(spec);
    if !(table.residual <= tol) {
        return Err(Error::NonConvergence {
            iterations: 0,
            residual: table.residual,
        });
    }
    Ok((table, cert))
}

type BlockSolution = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

/// Damped Newton on the 2x2 group potentials, gauge `tau[last group] = 0`.
fn block_newton(layout: &BlockLayout, total: f64, tol: f64) -> Result<BlockSolution> {
    const MAX_STEPS: usize = 500;
    let p: Vec<f64> = layout.row_counts.iter().map(|&c| c as f64).collect();
    let q: Vec<f64> = layout.col_counts.iter().map(|&c| c as f64).collect();
    let r = &layout.row_sums;
    let c = &layout.col_sums;
    let pinned = layout.last_col_group();
    let free_col = 1 - pinned;

    // Unknowns: lambda_0, lambda_1, tau_free.
    let unpack = |v: &[f64; 3]| -> ([f64; 2], [f64; 2]) {
        let mut tau = [0.0; 2];
        tau[free_col] = v[2];
        ([v[0], v[1]], tau)
    };
    let feasible = |v: &[f64; 3]| {
        let (l, t) = unpack(v);
        (0..2).all(|g| (0..2).all(|h| l[g] + t[h] > 0.0))
    };
    let objective = |v: &[f64; 3]| {
        let (l, t) = unpack(v);
        let mut f = 0.0;
        for g in 0..2 {
            f += p[g] * r[g] * l[g];
        }
        for h in 0..2 {
            f += q[h] * c[h] * t[h];
        }
        for g in 0..2 {
            for h in 0..2 {
                f -= p[g] * q[h] * (-(-(l[g] + t[h])).exp_m1()).ln();
            }
        }
        f
    };
    let table_of = |v: &[f64; 3]| {
        let (l, t) = unpack(v);
        let mut z = [[0.0; 2]; 2];
        for g in 0..2 {
            for h in 0..2 {
                z[g][h] = entry_from_potential(l[g] + t[h]);
            }
        }
        z
    };
    let residual_of = |z: &[[f64; 2]; 2]| {
        let mut res: f64 = 0.0;
        for g in 0..2 {
            res = res.max((r[g] - (q[0] * z[g][0] + q[1] * z[g][1])).abs());
        }
        for h in 0..2 {
            res = res.max((c[h] - (p[0] * z[0][h] + p[1] * z[1][h])).abs());
        }
        res
    };

    let mn = layout.m() as f64 * layout.n() as f64;
    let init = 0.5 * (1.0 + mn / total).ln();
    // Constant table N/(mn) with the pinned gauge.
    let mut v = [2.0 * init, 2.0 * init, 0.0];

    let mut residual = f64::INFINITY;
    for _step in 0..MAX_STEPS {
        let z = table_of(&v);
        residual = residual_of(&z);
        if residual <= tol {
            let (l, t) = unpack(&v);
            let values = z.iter().map(|row| row.to_vec()).collect();
            return Ok((values, l.to_vec(), t.to_vec()));
        }
        let w = z.map(|row| row.map(weight));
        let grad = DVector::from_column_slice(&[
            p[0] * (r[0] - q[0] * z[0][0] - q[1] * z[0][1]),
            p[1] * (r[1] - q[0] * z[1][0] - q[1] * z[1][1]),
            q[free_col] * (c[free_col] - p[0] * z[0][free_col] - p[1] * z[1][free_col]),
        ]);
        let hf = free_col;
        let hess = DMatrix::from_row_slice(
            3,
            3,
            &[
                p[0] * (q[0] * w[0][0] + q[1] * w[0][1]),
                0.0,
                p[0] * q[hf] * w[0][hf],
                0.0,
                p[1] * (q[0] * w[1][0] + q[1] * w[1][1]),
                p[1] * q[hf] * w[1][hf],
                p[0] * q[hf] * w[0][hf],
                p[1] * q[hf] * w[1][hf],
                q[hf] * (p[0] * w[0][hf] + p[1] * w[1][hf]),
            ],
        );
        let step = hess
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .solve(&(-&grad));
        let slope = grad.dot(&step);
        let f0 = objective(&v);
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-12 {
            let trial = [
                v[0] + alpha * step[0],
                v[1] + alpha * step[1],
                v[2] + alpha * step[2],
            ];
            if feasible(&trial) {
                let f1 = objective(&trial);
                if f1 <= f0 + 1e-4 * alpha * slope + 1e-14 * f0.abs() {
                    v = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_STEPS,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Subcritical,
    Supercritical,
}

/// Large-`n` limits of the three distinct block entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitPrediction {
    pub regime: Regime,
    /// Heavy-heavy limit; subcritical only.
    pub z11_limit: Option<f64>,
    pub z1n1_limit: f64,
    pub znn_limit: f64,
    /// Limit of `n^(delta-1) z_11`; supercritical only.
    pub scaled_z11_limit: Option<f64>,
}

pub fn large_n_limits(params: FamilyParams) -> Result<LimitPrediction> {
    let (b, c) = (params.b, params.c);
    let b_c = params.critical_b();
    if (b - b_c).abs() <= 1e-12 * b_c {
        return Err(Error::CriticalRegime { b_c });
    }
    Ok(if b < b_c {
        LimitPrediction {
            regime: Regime::Subcritical,
            z11_limit: Some(b * b * (c + 1.0) / ((b_c - b) * (b_c + b - 2.0))),
            z1n1_limit: b * c,
            znn_limit: c,
            scaled_z11_limit: None,
        }
    } else {
        LimitPrediction {
            regime: Regime::Supercritical,
            z11_limit: None,
            z1n1_limit: b_c * c,
            znn_limit: c,
            scaled_z11_limit: Some(c * (b - b_c)),
        }
    })
}
