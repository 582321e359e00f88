use std::fmt;

use thiserror::Error;

/// Pipeline stage a propagated error originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Margins,
    Solver,
    Assembly,
    Determinant,
    Correction,
    Exact,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Margins => "margins",
            Stage::Solver => "solver",
            Stage::Assembly => "assembly",
            Stage::Determinant => "determinant",
            Stage::Correction => "correction",
            Stage::Exact => "exact",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate margin: {0}")]
    DegenerateMargin(String),

    #[error("margins are not balanced (row total - column total = {residual})")]
    Imbalanced { residual: f64 },

    #[error("margins must be non-negative integers for exact counting; use the estimate-only pipeline instead")]
    NotIntegral,

    #[error("solver did not converge after {iterations} sweeps (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("problem too large for dense layout: {0}")]
    TooLarge(String),

    #[error("margins are not a two-value block family: {0}")]
    NotBlock(String),

    #[error("structured determinant expansion is negative ({0:e} relative to det A); use the dense path")]
    NegativeDeterminant(f64),

    #[error("state budget of {budget} memo entries exceeded ({states} states explored, {memo_hits} memo hits)")]
    StateBudget {
        budget: usize,
        states: usize,
        memo_hits: usize,
    },

    #[error("B equals the critical value B_c = {b_c}; limits are undefined there")]
    CriticalRegime { b_c: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Innermost error with stage tags removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.at(stage))
    }
}
