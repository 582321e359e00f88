//! Gaussian model of the entropy around the typical table: the matrix `Q`,
//! its determinant by two routes, and the second-order correction.

pub mod correction;
pub mod quadratic;
pub mod structured;

pub use correction::{
    correction_mc, correction_wick, dense_wick, CorrectionEstimate, CorrectionMethod, Sampler,
};
pub use quadratic::{assemble_q, det_qh_bridge, logdet_dense, QLayout, QuadraticModel};
pub use structured::{structured_logdet, MinorTerm, StructuredDetBreakdown};
