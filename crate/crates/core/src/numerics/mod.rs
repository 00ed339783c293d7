//! Numerical kernels shared by every integral in the crate.
//!
//! Everything that integrates, inverts a characteristic function or builds
//! quadrature nodes goes through this module: adaptive Gauss–Kronrod on
//! finite intervals, an accelerated oscillatory integrator for
//! semi-infinite Fourier-type integrals, Gauss rules built by
//! Golub–Welsch, and the special functions needed by the closed-form
//! cross-checks.

mod gauss;
mod oscillatory;
mod quadrature;
pub mod special;

pub use gauss::{gauss_hermite, gauss_laguerre, gauss_legendre, GaussRule, MAX_GAUSS_NODES};
pub use oscillatory::{
    euler_accelerate, gil_pelaez_cdf, integrate_semi_infinite_oscillatory, AlternatingTail,
    OriginHandling, TailStatus,
};
pub use quadrature::{integrate_finite, QuadValue};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("invalid integration interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("invalid quadrature settings: {0}")]
    InvalidSettings(String),
    #[error("node count {n} outside supported range 1..={max}")]
    NodeCount { n: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{what} did not converge (last value {value:e})")]
    NonConvergence { what: &'static str, value: f64 },
}

/// Tolerances and work limits for the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Maximum number of half-period batches summed in an oscillatory tail.
    pub oscillatory_period_batches: usize,
    /// A tail stops once increments fall below this fraction of the running total.
    pub tail_truncation_threshold: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-7,
            abs_tol: 1e-10,
            max_subdivisions: 2000,
            oscillatory_period_batches: 2000,
            tail_truncation_threshold: 1e-9,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<(), NumericsError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.rel_tol) || !positive(self.abs_tol) {
            return Err(NumericsError::InvalidSettings(
                "tolerances must be finite and > 0".into(),
            ));
        }
        if !positive(self.tail_truncation_threshold) {
            return Err(NumericsError::InvalidSettings(
                "tail_truncation_threshold must be finite and > 0".into(),
            ));
        }
        if self.max_subdivisions < 8 {
            return Err(NumericsError::InvalidSettings(
                "max_subdivisions must be at least 8".into(),
            ));
        }
        if self.oscillatory_period_batches == 0 {
            return Err(NumericsError::InvalidSettings(
                "oscillatory_period_batches must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn tolerance_for(&self, magnitude: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * magnitude)
    }
}

/// Result of an adaptive integration.
///
/// `converged == false` means the work limit was hit before the error
/// target; the value is still the best estimate available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<T> {
    pub value: T,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl<T> Integral<T> {
    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Integral<U> {
        Integral {
            value: f(self.value),
            error: self.error,
            converged: self.converged,
            evaluations: self.evaluations,
        }
    }
}
