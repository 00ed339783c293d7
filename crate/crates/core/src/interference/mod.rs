//! Aggregate interference of a Poisson field of base stations.
//!
//! Interferers form a PPP of intensity `λ/Δ` outside the ball of radius
//! `R₀` around the typical user. The interference CF is
//! `φ_I(ω) = exp(-2π (λ/Δ) β(ω))` and its CDF follows from Gil-Pelaez
//! inversion.

mod closed_form;
mod inversion;
mod kernel;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fading::{FadingError, FadingModel};
use crate::numerics::{integrate_finite, NumericsError, QuadratureSettings};

pub use closed_form::{beta_closed_pathloss, beta_closed_rayleigh};
pub use kernel::BetaKernel;

use inversion::{invert, Scaled, Unbounded};

/// CDF values this far outside `[0, 1]` are clamped; larger excursions
/// are reported as errors.
pub const CLAMP_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterferenceError {
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("closed form requires {expected} interferers, got {got}")]
    WrongFading { expected: &'static str, got: String },
    #[error("{what} did not converge (partial value {partial:e})")]
    NonConvergence { what: &'static str, partial: f64 },
    #[error("CDF value {0} lies outside [0, 1] beyond the clamp tolerance")]
    Excursion(f64),
    #[error(transparent)]
    Fading(#[from] FadingError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Receiver noise. Interference-limited operation is its own state rather
/// than a zero power so that scale-free properties hold exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    InterferenceLimited,
    Thermal { watts: f64 },
}

impl Noise {
    pub fn watts(&self) -> f64 {
        match self {
            Noise::InterferenceLimited => 0.0,
            Noise::Thermal { watts } => *watts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Base-station intensity per unit area.
    pub lambda: f64,
    /// Common transmit power, watts.
    pub p0: f64,
    /// Path-loss exponent, > 2.
    pub alpha: f64,
    pub noise: Noise,
    /// Frequency reuse factor Δ ≥ 1.
    pub delta: u32,
}

impl NetworkConfig {
    pub fn interference_limited(lambda: f64, p0: f64, alpha: f64) -> Self {
        Self {
            lambda,
            p0,
            alpha,
            noise: Noise::InterferenceLimited,
            delta: 1,
        }
    }

    pub fn with_delta(mut self, delta: u32) -> Self {
        self.delta = delta;
        self
    }

    /// Thermal noise of `watts`.
    pub fn with_noise(mut self, watts: f64) -> Self {
        self.noise = Noise::Thermal { watts };
        self
    }

    pub fn validate(&self) -> Result<(), InterferenceError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.lambda) {
            return Err(InterferenceError::Config(format!(
                "lambda must be finite and > 0, got {}",
                self.lambda
            )));
        }
        if !positive(self.p0) {
            return Err(InterferenceError::Config(format!(
                "p0 must be finite and > 0, got {}",
                self.p0
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 2.0) {
            return Err(InterferenceError::Config(format!(
                "alpha must be > 2, got {}",
                self.alpha
            )));
        }
        if self.delta < 1 {
            return Err(InterferenceError::Config(format!(
                "delta must be >= 1, got {}",
                self.delta
            )));
        }
        let w = self.noise_w();
        if !(w.is_finite() && w >= 0.0) {
            return Err(InterferenceError::Config(format!(
                "noise power must be finite and >= 0, got {w}"
            )));
        }
        Ok(())
    }

    /// Intensity of co-channel interferers, `λ/Δ`.
    pub fn effective_lambda(&self) -> f64 {
        self.lambda / self.delta as f64
    }

    /// Noise power W in watts; zero when interference-limited.
    pub fn noise_w(&self) -> f64 {
        self.noise.watts()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceContext {
    pub config: NetworkConfig,
    pub interferer_fading: FadingModel,
    /// Contact distance: interferers lie outside this radius.
    pub r0: f64,
}

impl InterferenceContext {
    pub fn new(config: NetworkConfig, interferer_fading: FadingModel, r0: f64) -> Result<Self, InterferenceError> {
        config.validate()?;
        interferer_fading.validate()?;
        if !(r0.is_finite() && r0 >= 0.0) {
            return Err(InterferenceError::Config(format!(
                "contact distance must be finite and >= 0, got {r0}"
            )));
        }
        Ok(Self {
            config,
            interferer_fading,
            r0,
        })
    }
}

/// `β(ω) = ∫_{R₀}^∞ [1 - φ_P(ω r^{-α})] r dr` by adaptive quadrature.
///
/// With `t = r²` the integral becomes `½ ∫_{R₀²}^∞ [1 - φ_P(ω t^{-α/2})] dt`.
/// It is integrated up to the point where `y = P₀ ω t^{-α/2}` is small and
/// the remainder is taken from the first two moments of the gain.
pub fn beta(ctx: &InterferenceContext, omega: f64, settings: &QuadratureSettings) -> Result<Complex64, InterferenceError> {
    if omega == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if omega < 0.0 {
        return beta(ctx, -omega, settings).map(|b| b.conj());
    }
    let cfg = &ctx.config;
    let alpha = cfg.alpha;
    let fading = &ctx.interferer_fading;
    if ctx.r0 == 0.0 {
        let k = BetaKernel::new(fading, alpha)?;
        return Ok(k.beta(0.0, cfg.p0, omega));
    }
    let mean = fading.mean();
    let second = fading.second_moment();
    let w = omega * cfg.p0;
    // keep the neglected third-order term far below the tolerance
    let y_tail = 1e-4 * mean / second.max(mean);
    let t0 = ctx.r0 * ctx.r0;
    let y0 = w * ctx.r0.powf(-alpha);
    let top = if y0 > y_tail {
        t0 * (y0 / y_tail).powf(2.0 / alpha)
    } else {
        t0
    };

    let integrand = |t: f64| fading.one_minus_cf(w * t.powf(-0.5 * alpha));
    let mut head = Complex64::new(0.0, 0.0);
    let mut lo = t0;
    while lo < top {
        let hi = (lo * 4.0).min(top);
        let piece = integrate_finite(integrand, lo, hi, settings)?;
        head += piece.value;
        if !piece.converged {
            return Err(InterferenceError::NonConvergence {
                what: "beta quadrature",
                partial: (0.5 * head).norm(),
            });
        }
        lo = hi;
    }
    let first = Complex64::new(0.0, -w * mean * top.powf(1.0 - 0.5 * alpha) / (0.5 * alpha - 1.0));
    let second_term = w * w * second * top.powf(1.0 - alpha) / (2.0 * (alpha - 1.0));
    Ok(0.5 * (head + first + second_term))
}

/// `φ_I(ω) = exp(-2π (λ/Δ) β(ω))`.
pub fn interference_cf(
    ctx: &InterferenceContext,
    omega: f64,
    settings: &QuadratureSettings,
) -> Result<Complex64, InterferenceError> {
    let b = beta(ctx, omega, settings)?;
    Ok((-2.0 * PI * ctx.config.effective_lambda() * b).exp())
}

/// Result of one interference CDF evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfValue {
    /// Value clamped to `[0, 1]`.
    pub value: f64,
    /// Value before clamping.
    pub raw: f64,
    pub error: f64,
    pub converged: bool,
}

/// Interference CDFs for one network and interferer model, reusing a
/// single tabulated kernel across contact distances.
#[derive(Debug, Clone)]
pub struct InterferenceField {
    config: NetworkConfig,
    kernel: BetaKernel,
    settings: QuadratureSettings,
}

impl InterferenceField {
    pub fn new(
        config: NetworkConfig,
        interferer_fading: &FadingModel,
        settings: QuadratureSettings,
    ) -> Result<Self, InterferenceError> {
        config.validate()?;
        settings.validate()?;
        let kernel = BetaKernel::new(interferer_fading, config.alpha)?;
        Ok(Self {
            config,
            kernel,
            settings,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn kernel(&self) -> &BetaKernel {
        &self.kernel
    }

    /// `F_I(x | R₀ = r0)`.
    pub fn cdf(&self, r0: f64, x: f64) -> Result<CdfValue, InterferenceError> {
        let c = &self.config;
        let lam = c.effective_lambda();
        if r0 == 0.0 {
            let a = 2.0 / c.alpha;
            // u = P₀ ω (2π λ)^{1/a} makes ψ(u) = u^a C / α
            let scale = c.p0 * (2.0 * PI * lam).powf(1.0 / a);
            let e = Unbounded {
                a,
                coefficient: self.kernel.origin_constant() / c.alpha,
            };
            return finish(invert(&e, x / scale, &self.settings)?);
        }
        let kappa = 2.0 * PI * lam * r0 * r0;
        let xi = x * r0.powf(c.alpha) / c.p0;
        self.normalized_cdf(kappa, xi)
    }

    /// CDF in normalised units: `κ = 2π (λ/Δ) R₀²`, `ξ = x R₀^α / P₀`.
    pub fn normalized_cdf(&self, kappa: f64, xi: f64) -> Result<CdfValue, InterferenceError> {
        if kappa == 0.0 {
            let v = if xi >= 0.0 { 1.0 } else { 0.0 };
            return Ok(CdfValue {
                value: v,
                raw: v,
                error: 0.0,
                converged: true,
            });
        }
        let e = Scaled {
            kernel: &self.kernel,
            kappa,
        };
        finish(invert(&e, xi, &self.settings)?)
    }
}

fn finish(r: crate::numerics::Integral<f64>) -> Result<CdfValue, InterferenceError> {
    let raw = r.value;
    if !raw.is_finite() || raw < -CLAMP_TOLERANCE || raw > 1.0 + CLAMP_TOLERANCE {
        return Err(InterferenceError::Excursion(raw));
    }
    Ok(CdfValue {
        value: raw.clamp(0.0, 1.0),
        raw,
        error: r.error,
        converged: r.converged,
    })
}

/// `F_I(x | R₀)` by Gil-Pelaez inversion.
pub fn interference_cdf(
    ctx: &InterferenceContext,
    x: f64,
    settings: &QuadratureSettings,
) -> Result<f64, InterferenceError> {
    let field = InterferenceField::new(ctx.config, &ctx.interferer_fading, *settings)?;
    let v = field.cdf(ctx.r0, x)?;
    if !v.converged {
        return Err(InterferenceError::NonConvergence {
            what: "interference CDF inversion",
            partial: v.value,
        });
    }
    Ok(v.value)
}
