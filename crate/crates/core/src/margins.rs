//! Margin vectors and the two parametric two-value families.
//!
//! The square family puts `floor(n^delta)` heavy margins of `floor(B*C*n)` in
//! front of `n` light margins of `floor(C*n)`, identically on both sides. The
//! left-half family is rectangular and real-valued: heavy rows `B_c*C*n`,
//! light rows `C*n - B_c*C*n_heavy` and `n` columns of `C*n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::typical::TypicalTable;

/// Relative tolerance used for balance of real-valued margins.
pub const BALANCE_TOL: f64 = 1e-9;

/// Absolute tolerance for the integrality flag.
pub const INTEGRAL_TOL: f64 = 1e-9;

/// `floor(x)` that forgives a few ulps of error just below an integer.
fn floor_tol(x: f64) -> f64 {
    (x + 1e-12 * x.abs().max(1.0)).floor()
}

/// `B_c = 1 + sqrt(1 + 1/C)`.
pub fn critical_multiplier(c: f64) -> f64 {
    1.0 + (1.0 + 1.0 / c).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub n: usize,
    pub delta: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl FamilyParams {
    pub fn new(n: usize, delta: f64, b: f64, c: f64) -> Result<Self> {
        let params = FamilyParams { n, delta, b, c };
        params.check()?;
        Ok(params)
    }

    fn check(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidParams("n must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::InvalidParams(format!(
                "delta must lie in [0, 1), got {}",
                self.delta
            )));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidParams(format!("B must be positive, got {}", self.b)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParams(format!("C must be positive, got {}", self.c)));
        }
        Ok(())
    }

    /// Number of heavy margins, `floor(n^delta)`; exactly 1 when `delta == 0`.
    pub fn n_heavy(&self) -> usize {
        if self.delta == 0.0 {
            return 1;
        }
        (floor_tol((self.n as f64).powf(self.delta)) as usize).max(1)
    }

    pub fn critical_b(&self) -> f64 {
        critical_multiplier(self.c)
    }

    pub fn is_subcritical(&self) -> bool {
        self.b < self.critical_b()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Bd,
    LeftHalf,
}

/// Which parametric family (if any) a margin pair was generated from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Family {
    pub kind: FamilyKind,
    pub params: FamilyParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginSpec {
    rows: Vec<f64>,
    cols: Vec<f64>,
    total: f64,
    origin: Option<Family>,
}

/// Report produced by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginDiagnostics {
    pub row_total: f64,
    pub col_total: f64,
    /// Row total minus column total.
    pub balance_residual: f64,
    pub balanced: bool,
    pub positive: bool,
    pub integral: bool,
}

/// Reports balance, positivity and integrality of a raw margin pair.
pub fn validate(rows: &[f64], cols: &[f64]) -> MarginDiagnostics {
    let row_total: f64 = rows.iter().sum();
    let col_total: f64 = cols.iter().sum();
    let integral = rows
        .iter()
        .chain(cols)
        .all(|v| (v - v.round()).abs() <= INTEGRAL_TOL);
    let residual = row_total - col_total;
    let balanced = if integral {
        residual.abs() < 0.5
    } else {
        residual.abs() <= BALANCE_TOL * row_total.abs().max(col_total.abs()).max(1.0)
    };
    MarginDiagnostics {
        row_total,
        col_total,
        balance_residual: residual,
        balanced,
        positive: rows.iter().chain(cols).all(|&v| v > 0.0 && v.is_finite()),
        integral,
    }
}

impl MarginSpec {
    /// Builds a spec after checking positivity and balance.
    pub fn new(rows: Vec<f64>, cols: Vec<f64>) -> Result<Self> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::InvalidParams("margins need at least one row and one column".into()));
        }
        let diag = validate(&rows, &cols);
        if !diag.positive {
            return Err(Error::DegenerateMargin("all margins must be strictly positive".into()));
        }
        if !diag.balanced {
            return Err(Error::Imbalanced {
                residual: diag.balance_residual,
            });
        }
        Ok(MarginSpec {
            rows,
            cols,
            total: diag.row_total,
            origin: None,
        })
    }

    pub fn from_integers(rows: &[u64], cols: &[u64]) -> Result<Self> {
        Self::new(
            rows.iter().map(|&v| v as f64).collect(),
            cols.iter().map(|&v| v as f64).collect(),
        )
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    pub fn cols(&self) -> &[f64] {
        &self.cols
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.cols.len()
    }

    pub fn origin(&self) -> Option<&Family> {
        self.origin.as_ref()
    }

    pub fn validate(&self) -> MarginDiagnostics {
        validate(&self.rows, &self.cols)
    }

    pub fn is_integral(&self) -> bool {
        self.validate().integral
    }

    /// Margins rounded to integers, or `None` if any entry is not integral.
    pub fn integer_margins(&self) -> Option<(Vec<u64>, Vec<u64>)> {
        if !self.is_integral() {
            return None;
        }
        let round = |v: &[f64]| v.iter().map(|x| x.round() as u64).collect();
        Some((round(&self.rows), round(&self.cols)))
    }

    /// Swaps rows and columns. The family tag is dropped for the rectangular
    /// left-half family since the transposed margins are no longer of that shape.
    pub fn transposed(&self) -> MarginSpec {
        MarginSpec {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            total: self.total,
            origin: self.origin.filter(|f| f.kind == FamilyKind::Bd),
        }
    }
}

/// The square two-value family: `floor(n^delta)` margins of `floor(BCn)`
/// followed by `n` margins of `floor(Cn)`, on both sides.
pub fn bd_margins(params: FamilyParams) -> Result<MarginSpec> {
    params.check()?;
    let n = params.n as f64;
    let heavy = floor_tol(params.b * params.c * n);
    let light = floor_tol(params.c * n);
    if heavy < 1.0 {
        return Err(Error::DegenerateMargin(format!(
            "floor(B*C*n) = floor({}) is 0",
            params.b * params.c * n
        )));
    }
    if light < 1.0 {
        return Err(Error::DegenerateMargin(format!(
            "floor(C*n) = floor({}) is 0",
            params.c * n
        )));
    }
    let k = params.n_heavy();
    let mut margins = vec![heavy; k];
    margins.extend(std::iter::repeat_n(light, params.n));
    let mut spec = MarginSpec::new(margins.clone(), margins)?;
    spec.origin = Some(Family {
        kind: FamilyKind::Bd,
        params,
    });
    Ok(spec)
}

/// The rectangular left-half family. `B` is ignored; heavy rows carry
/// `B_c*C*n`, light rows `C*n - B_c*C*n_heavy`, and all `n` columns `C*n`.
pub fn left_half_margins(params: FamilyParams) -> Result<MarginSpec> {
    params.check()?;
    let n = params.n as f64;
    let k = params.n_heavy();
    let b_c = params.critical_b();
    let heavy = b_c * params.c * n;
    let light = params.c * n - b_c * params.c * k as f64;
    if light <= 0.0 {
        return Err(Error::DegenerateMargin(format!(
            "light row sum C*n - B_c*C*n_heavy = {light} is not positive (needs n / n_heavy > B_c = {b_c})"
        )));
    }
    let mut rows = vec![heavy; k];
    rows.extend(std::iter::repeat_n(light, params.n));
    let cols = vec![params.c * n; params.n];
    let mut spec = MarginSpec::new(rows, cols)?;
    spec.origin = Some(Family {
        kind: FamilyKind::LeftHalf,
        params,
    });
    Ok(spec)
}

/// JSON margin file: explicit vectors or a family shorthand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MarginFile {
    Explicit {
        rows: Vec<f64>,
        cols: Vec<f64>,
    },
    Family {
        family: FamilyKind,
        n: usize,
        #[serde(default)]
        delta: f64,
        #[serde(rename = "B", default = "default_b")]
        b: f64,
        #[serde(rename = "C")]
        c: f64,
    },
}

fn default_b() -> f64 {
    1.0
}

impl MarginFile {
    pub fn into_spec(self) -> Result<MarginSpec> {
        match self {
            MarginFile::Explicit { rows, cols } => MarginSpec::new(rows, cols),
            MarginFile::Family {
                family,
                n,
                delta,
                b,
                c,
            } => {
                let params = FamilyParams::new(n, delta, b, c)?;
                match family {
                    FamilyKind::Bd => bd_margins(params),
                    FamilyKind::LeftHalf => left_half_margins(params),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub dim_ratio_ok: bool,
    pub entry_ratio_ok: bool,
    pub best_delta_prime: f64,
    pub tau: f64,
}

/// Dimension and entry ratios of a typical table, checked against a target `delta_prime`.
///
/// `best_delta_prime = min(m/n, n/m, z_min/z_max)` and `tau = max(z_max, best_delta_prime)`.
pub fn check_smoothness(
    spec: &MarginSpec,
    table: &TypicalTable,
    delta_prime: f64,
) -> Result<SmoothnessReport> {
    if table.m() != spec.m() || table.n() != spec.n() {
        return Err(Error::DimensionMismatch(format!(
            "table is {}x{}, margins are {}x{}",
            table.m(),
            table.n(),
            spec.m(),
            spec.n()
        )));
    }
    let (z_min, z_max) = table.entry_range();
    if !(z_min > 0.0) {
        return Err(Error::InvalidParams(format!(
            "typical table has a non-positive entry {z_min}"
        )));
    }
    let (m, n) = (spec.m() as f64, spec.n() as f64);
    let dim_ratio = (m / n).min(n / m);
    let entry_ratio = z_min / z_max;
    let best = dim_ratio.min(entry_ratio).min(1.0);
    let tau = z_max.max(best);
    Ok(SmoothnessReport {
        dim_ratio_ok: dim_ratio >= delta_prime,
        entry_ratio_ok: entry_ratio >= delta_prime && tau >= delta_prime,
        best_delta_prime: best,
        tau,
    })
}
