//! Sensitivity analysis for the causal hazard ratio `HR^C(t)` in survival data.
//!
//! The causal hazard ratio at time `t` contrasts the event rates under
//! treatment and control within the sub-population that would remain
//! event-free up to `t` under either treatment. It is not point-identified
//! from observed data; this crate identifies it up to the variance of a
//! working frailty variable and sweeps that sensitivity parameter.
//!
//! The pipeline, bottom to top:
//!
//! - [`survival`] — immutable sample model, risk sets, (weighted)
//!   Nelson-Aalen and Kaplan-Meier estimators, log-rank test, estimation grid
//! - [`frailty`] — Gamma / inverse Gaussian / positive stable frailty
//!   families: Laplace transforms, the identification multiplier, and
//!   Kendall's tau conversions
//! - [`cox`] — (weighted) Cox regression with Breslow baseline, the
//!   Schoenfeld-residual PH score test, and the Cox-based `HR^C(t)` curve
//! - [`kernel`] — boundary-kernel hazard smoothing with local
//!   MSE-minimizing bandwidths
//! - [`weights`] — propensity scores, stabilized/truncated IPTW weights,
//!   covariate balance diagnostics
//! - [`sensitivity`] — assembles `HR^C(t)` curves over frailty families and
//!   tau values through either estimation backend
//! - [`bootstrap`] — percentile confidence intervals by subject resampling
//! - [`simulate`] — synthetic scenarios with known `HR^C(t)` for validation
//! - [`study`] — replication harness producing bias/coverage summaries
//! - [`csvio`] — CSV schemas for samples, curves, and diagnostic tables

pub mod bootstrap;
pub mod cox;
pub mod csvio;
pub mod frailty;
pub mod kernel;
pub mod numeric;
pub mod sensitivity;
pub mod simulate;
pub mod study;
pub mod survival;
pub mod weights;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data or parameters violate a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// An estimator could not produce a result on valid input.
    #[error("estimation failed: {0}")]
    Estimation(String),
    /// An iterative procedure failed to converge; the message carries the trace.
    #[error("convergence failure: {0}")]
    NonConvergence(String),
    /// Malformed CSV content; the message names the offending row.
    #[error("csv error: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
