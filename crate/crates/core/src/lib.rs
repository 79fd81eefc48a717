//! Poisson-type approximations to sums of 1-dependent nonnegative integer
//! random variables, with exact error evaluation.
//!
//! The crate is organised bottom-up:
//!
//! * [`measures`]: finitely supported signed measures on the integers and the
//!   six approximating families (Poisson, second-order Poisson, signed
//!   compound Poisson, translated Poisson, negative binomial, binomial).
//! * [`models`]: 1-dependent summands built as functionals of a hidden
//!   independent Bernoulli chain, with exact sum laws.
//! * [`moments`]: factorial moments, centered mixed moments, the remainder
//!   terms `R0`/`R1` and the regularity conditions.
//! * [`metrics`]: weighted Kolmogorov, weighted local, total variation and
//!   Wasserstein discrepancies.
//! * [`harness`]: parameter sweeps, bound reports and constant estimates.
//!
//! The numerical core is generic over the scalar type ([`Real`]); the
//! aliases below fix it to `f64`, which is what the harness and CLI use.

// `!(x > 0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod measures;
pub mod metrics;
pub mod models;
pub mod moments;
pub mod scalar;

pub use error::{Error, Result};
pub use measures::{ApproximationFamily, FamilyParams, SignedMeasure};
pub use metrics::DiscrepancyResult;
pub use models::{BlockedModel, OneDependentModel};
pub use moments::MomentSummary;
pub use scalar::Real;

/// Signed measure with `f64` weights.
pub type Measure = SignedMeasure<f64>;
/// Family parameters in `f64`.
pub type Params = FamilyParams<f64>;
/// 1-dependent chain model with `f64` probabilities.
pub type Model = OneDependentModel<f64>;
/// Moment summary in `f64`.
pub type Summary = MomentSummary<f64>;
/// Discrepancy in `f64`.
pub type Discrepancy = DiscrepancyResult<f64>;
