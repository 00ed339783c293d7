//! Closed forms of β for deterministic and Rayleigh interferers, used to
//! cross-check the quadrature path.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{InterferenceContext, InterferenceError};
use crate::fading::FadingModel;
use crate::numerics::special::{gamma, hyp2f1, upper_incomplete_gamma};

fn require(ctx: &InterferenceContext, expected: &'static str, ok: bool) -> Result<(), InterferenceError> {
    if ok {
        Ok(())
    } else {
        Err(InterferenceError::WrongFading {
            expected,
            got: ctx.interferer_fading.label(),
        })
    }
}

/// β for path loss only:
/// `-R₀²/2 + ((-jP₀ω)^{2/α}/α) [Γ(-2/α, -jP₀R₀^{-α}ω) - Γ(-2/α)]`.
pub fn beta_closed_pathloss(ctx: &InterferenceContext, omega: f64) -> Result<Complex64, InterferenceError> {
    require(
        ctx,
        "deterministic",
        matches!(ctx.interferer_fading, FadingModel::Deterministic),
    )?;
    if omega == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if omega < 0.0 {
        return beta_closed_pathloss(ctx, -omega).map(|b| b.conj());
    }
    let alpha = ctx.config.alpha;
    let a = 2.0 / alpha;
    let w = ctx.config.p0 * omega;
    let prefactor = Complex64::new(0.0, -w).powf(a) / alpha;
    let r0 = ctx.r0;
    if r0 == 0.0 {
        return Ok(-prefactor * gamma(-a));
    }
    let z = Complex64::new(0.0, -w * r0.powf(-alpha));
    let upper = upper_incomplete_gamma(-a, z)?;
    Ok(-0.5 * r0 * r0 + prefactor * (upper - gamma(-a)))
}

/// β for Rayleigh interferers:
/// `-R₀²/2 + (π/α)(-jP₀ω)^{2/α} csc(2π/α)
///  + j R₀^{2+α} / ((α+2) P₀ω) ₂F₁(1, 1+2/α; 2+2/α; -jR₀^α/(P₀ω))`.
pub fn beta_closed_rayleigh(ctx: &InterferenceContext, omega: f64) -> Result<Complex64, InterferenceError> {
    require(
        ctx,
        "Rayleigh",
        matches!(ctx.interferer_fading, FadingModel::Rayleigh),
    )?;
    if omega == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if omega < 0.0 {
        return beta_closed_rayleigh(ctx, -omega).map(|b| b.conj());
    }
    let alpha = ctx.config.alpha;
    let a = 2.0 / alpha;
    let w = ctx.config.p0 * omega;
    let origin = PI / alpha * Complex64::new(0.0, -w).powf(a) / (2.0 * PI / alpha).sin();
    let r0 = ctx.r0;
    if r0 == 0.0 {
        return Ok(origin);
    }
    let z = Complex64::new(0.0, -r0.powf(alpha) / w);
    let f = hyp2f1(1.0, 1.0 + a, 2.0 + a, z)?;
    let last = Complex64::new(0.0, r0.powf(2.0 + alpha) / ((alpha + 2.0) * w)) * f;
    Ok(-0.5 * r0 * r0 + origin + last)
}
