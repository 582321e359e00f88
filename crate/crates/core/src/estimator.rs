//! Maximum-entropy estimate of the number of tables:
//!
//! ```text
//! #M(r, c) ~ exp(g(Z)) / ((2 pi)^((m+n-1)/2) sqrt(det Q)) * exp(-mu/2 + nu)
//! ```
//!
//! and the equivalent form through `det(q|_H)`,
//! `exp(g(Z)) sqrt(m+n) / ((4 pi)^((m+n-1)/2) sqrt(det(q|_H))) * exp(-mu/2 + nu)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result, Stage, StageExt};
use crate::exact::count_exact;
use crate::gaussian::{
    assemble_q, correction_mc, correction_wick, det_qh_bridge, logdet_dense, structured_logdet,
    CorrectionEstimate, QuadraticModel, Sampler, StructuredDetBreakdown,
};
use crate::gaussian::correction::{DEFAULT_MC_SAMPLES, MAX_WICK_DENSE_DIM};
use crate::margins::{FamilyKind, MarginSpec};
use crate::typical::{
    solve_block_typical, solve_typical, BlockLayout, Layout, SolverOptions, TypicalTable,
};

/// Dense determinant is used below this `m + n` in `auto` mode.
pub const AUTO_STRUCTURED_ABOVE: usize = 500;

/// `sum (z+1) ln(z+1) - z ln z` over all cells.
pub fn g_of(table: &TypicalTable) -> Result<f64> {
    let cell = |z: f64| -> Result<f64> {
        if !(z > 0.0) {
            return Err(Error::InvalidParams(format!("table entry {z} is not positive")));
        }
        Ok((z + 1.0) * z.ln_1p() - z * z.ln())
    };
    match table.layout() {
        Layout::Dense(z) => z.iter().map(|&v| cell(v)).sum(),
        Layout::Block(b) => {
            let l = b.layout();
            let mut total = 0.0;
            for g in 0..l.row_groups() {
                for h in 0..l.col_groups() {
                    let mult = l.row_counts()[g] as f64 * l.col_counts()[h] as f64;
                    total += mult * cell(b.value(g, h))?;
                }
            }
            Ok(total)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    /// Block solver when margins take at most two values per side.
    #[default]
    Auto,
    Dense,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DetPath {
    Dense,
    Structured,
    /// Structured for block tables with `m + n > 500`, dense otherwise.
    #[default]
    Auto,
    /// Both; the dense value is used and the structured one is reported.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrectionChoice {
    None,
    Wick,
    MonteCarlo {
        samples: usize,
        seed: u64,
        sampler: Sampler,
    },
    /// Wick when feasible, otherwise Monte Carlo with the given seed.
    Auto { samples: usize, seed: Option<u64> },
}

impl Default for CorrectionChoice {
    fn default() -> Self {
        CorrectionChoice::Auto {
            samples: DEFAULT_MC_SAMPLES,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EstimateOptions {
    pub solver: SolverOptions,
    pub solver_choice: SolverChoice,
    pub det: DetPath,
    pub correction: CorrectionChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Components {
    pub g: f64,
    pub gauss_norm: f64,
    pub half_logdet: f64,
    pub correction_log: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogCountEstimate {
    pub total_log: f64,
    pub components: Components,
    pub hyperplane_form_log: f64,
    pub regime_warning: Option<String>,
    pub logdet_q: f64,
    pub log_det_qh: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dense_logdet: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structured: Option<StructuredDetBreakdown>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correction: Option<CorrectionEstimate>,
    #[serde(skip)]
    pub table: Option<TypicalTable>,
}

/// Picks and runs a typical-table solver.
pub fn solve_for(spec: &MarginSpec, opts: &EstimateOptions) -> Result<TypicalTable> {
    let block_ok = BlockLayout::detect(spec).is_ok();
    let use_block = match opts.solver_choice {
        SolverChoice::Auto => block_ok,
        SolverChoice::Block => true,
        SolverChoice::Dense => false,
    };
    let (table, _) = if use_block {
        solve_block_typical(spec, opts.solver.tol)
    } else {
        solve_typical(spec, opts.solver)
    }
    .stage(Stage::Solver)?;
    Ok(table)
}

fn regime_warning(spec: &MarginSpec) -> Option<String> {
    let family = spec.origin()?;
    if family.kind != FamilyKind::Bd {
        return None;
    }
    let b_c = family.params.critical_b();
    (family.params.b >= b_c).then(|| {
        format!(
            "B = {} >= B_c = {b_c:.6}: heavy-block entries grow with n and the entries are no longer of one order",
            family.params.b
        )
    })
}

fn run_correction(
    table: &TypicalTable,
    model: &QuadraticModel,
    choice: CorrectionChoice,
) -> Result<Option<CorrectionEstimate>> {
    let est = match choice {
        CorrectionChoice::None => return Ok(None),
        CorrectionChoice::Wick => correction_wick(table, model)?,
        CorrectionChoice::MonteCarlo {
            samples,
            seed,
            sampler,
        } => correction_mc(table, model, samples, seed, sampler)?,
        CorrectionChoice::Auto { samples, seed } => {
            if model.as_block().is_some() || model.dim() <= MAX_WICK_DENSE_DIM {
                correction_wick(table, model)?
            } else {
                let seed = seed.ok_or_else(|| {
                    Error::InvalidParams(
                        "dense dimension too large for the Wick sum; Monte Carlo needs a seed".into(),
                    )
                })?;
                correction_mc(table, model, samples, seed, Sampler::Reduced)?
            }
        }
    };
    Ok(Some(est))
}

/// Full pipeline: typical table, `Q`, log-determinant, correction.
pub fn estimate_log_count(spec: &MarginSpec, opts: &EstimateOptions) -> Result<LogCountEstimate> {
    let table = solve_for(spec, opts)?;
    estimate_from_table(spec, table, opts)
}

/// Runs everything after the solver on a given typical table.
pub fn estimate_from_table(
    spec: &MarginSpec,
    table: TypicalTable,
    opts: &EstimateOptions,
) -> Result<LogCountEstimate> {
    let (m, n) = (spec.m(), spec.n());
    let model = assemble_q(&table, spec).stage(Stage::Assembly)?;
    let log_g = g_of(&table).stage(Stage::Assembly)?;

    let is_block = table.as_block().is_some();
    let (dense_ld, structured) = match opts.det {
        DetPath::Dense => (Some(logdet_dense(&model)), None),
        DetPath::Structured => (None, Some(structured_logdet(&table, spec))),
        DetPath::Both => (Some(logdet_dense(&model)), Some(structured_logdet(&table, spec))),
        DetPath::Auto => {
            if is_block && m + n > AUTO_STRUCTURED_ABOVE {
                (None, Some(structured_logdet(&table, spec)))
            } else {
                (Some(logdet_dense(&model)), None)
            }
        }
    };
    let dense_ld = dense_ld.transpose().stage(Stage::Determinant)?;
    let structured = structured.transpose().stage(Stage::Determinant)?;
    let logdet_q = match (&dense_ld, &structured) {
        (Some(d), _) => *d,
        (None, Some(s)) => s.logdet_total,
        (None, None) => unreachable!("one determinant path always runs"),
    };

    let correction = run_correction(&table, &model, opts.correction).stage(Stage::Correction)?;
    let correction_log = correction.as_ref().map_or(0.0, |c| c.correction_log);

    let dim = (m + n - 1) as f64;
    let gauss_norm = 0.5 * dim * (2.0 * PI).ln();
    let half_logdet = 0.5 * logdet_q;
    let total_log = log_g - gauss_norm - half_logdet + correction_log;

    let log_det_qh = det_qh_bridge(&model, logdet_q);
    let hyperplane_form_log = log_g - 0.5 * dim * (4.0 * PI).ln() + 0.5 * ((m + n) as f64).ln()
        - 0.5 * log_det_qh
        + correction_log;

    Ok(LogCountEstimate {
        total_log,
        components: Components {
            g: log_g,
            gauss_norm,
            half_logdet,
            correction_log,
        },
        hyperplane_form_log,
        regime_warning: regime_warning(spec),
        logdet_q,
        log_det_qh,
        dense_logdet: dense_ld,
        structured,
        correction,
        table: Some(table),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub exact_count: String,
    pub exact_log: f64,
    pub estimate_log: f64,
    pub log_ratio: f64,
    pub components: Components,
    pub regime_warning: Option<String>,
}

/// Exact count next to the estimate; `log_ratio = estimate_log - exact_log`.
pub fn compare(spec: &MarginSpec, opts: &EstimateOptions) -> Result<Comparison> {
    if !spec.is_integral() {
        return Err(Error::NotIntegral);
    }
    let exact = count_exact(spec).stage(Stage::Exact)?;
    let est = estimate_log_count(spec, opts)?;
    let exact_log = exact.ln();
    Ok(Comparison {
        exact_count: exact.count.to_string(),
        exact_log,
        estimate_log: est.total_log,
        log_ratio: est.total_log - exact_log,
        components: est.components,
        regime_warning: est.regime_warning,
    })
}

/// JSON shape shared by the `estimate` and `compare` reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub total_log: f64,
    pub components: Components,
    pub regime_warning: Option<String>,
    pub exact_log: Option<f64>,
    pub log_ratio: Option<f64>,
}

impl From<&LogCountEstimate> for EstimateReport {
    fn from(e: &LogCountEstimate) -> Self {
        EstimateReport {
            total_log: e.total_log,
            components: e.components.clone(),
            regime_warning: e.regime_warning.clone(),
            exact_log: None,
            log_ratio: None,
        }
    }
}

impl From<&Comparison> for EstimateReport {
    fn from(c: &Comparison) -> Self {
        EstimateReport {
            total_log: c.estimate_log,
            components: c.components.clone(),
            regime_warning: c.regime_warning.clone(),
            exact_log: Some(c.exact_log),
            log_ratio: Some(c.log_ratio),
        }
    }
}
