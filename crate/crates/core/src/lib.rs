//! Weak detection and rank estimation for spiked Wigner matrices
//! `M = sqrt(lambda) X X^T + H` through linear spectral statistics.
//!
//! * [`model`]: noise laws, spike priors and samplers.
//! * [`spectrum`]: the optimal statistic, its limiting Gaussian law and the
//!   general CLT for linear spectral statistics.
//! * [`transform`]: the entrywise score transform and its density functionals.
//! * [`detect`]: hypothesis tests, rank estimation and limiting error curves.
//! * [`oracle`]: exact likelihood ratios by enumeration at small `n`.
//! * [`harness`]: the experiment runner behind the `wigner-detect` binary.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod detect;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod par;
pub mod spectrum;
pub mod transform;

pub use error::{Error, Result};
