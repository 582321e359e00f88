//! Counting non-negative integer matrices with prescribed row and column sums.
//!
//! Two routes are provided and meant to be checked against each other:
//!
//! - [`exact`]: memoized enumeration with arbitrary-precision counts.
//! - [`estimator`]: the maximum-entropy asymptotic formula built from the
//!   typical table ([`typical`]), the Gaussian model around it
//!   ([`gaussian`]) and a second-order correction.
//!
//! [`margins`] builds margin vectors, including the two-value families with
//! `floor(n^delta)` heavy margins.
//!
//! ```
//! use tablecensus::{estimator, exact, margins::MarginSpec};
//!
//! let spec = MarginSpec::new(vec![2.0, 2.0], vec![2.0, 2.0]).unwrap();
//! let count = exact::count_exact(&spec).unwrap();
//! assert_eq!(count.count.to_string(), "3");
//!
//! let est = estimator::estimate_log_count(&spec, &Default::default()).unwrap();
//! assert!((est.total_log - 3f64.ln()).abs() < 2f64.ln());
//! ```

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod estimator;
pub mod exact;
pub mod gaussian;
pub mod margins;
pub mod typical;

pub use error::{Error, Result, Stage};
