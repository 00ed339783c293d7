//! CDF of the aggregate interference from its characteristic function.
//!
//! In normalised units the CF is `exp(-ψ(u))` and
//! `F(ξ) = 1/2 - (1/π) ∫_0^∞ e^{-Re ψ(u)} sin θ(u) / u du` with
//! `θ(u) = -Im ψ(u) - u ξ`. Once the linear term dominates, θ is monotone;
//! the integral is split at consecutive zeros of `sin θ` and the resulting
//! alternating series is accelerated.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use super::kernel::BetaKernel;
use super::InterferenceError;
use crate::numerics::{
    gauss_legendre, integrate_finite, AlternatingTail, GaussRule, Integral, QuadratureSettings,
    TailStatus,
};

/// `Re ψ` beyond which the integrand is negligible (`e^{-45} ≈ 3e-20`).
const DECAY_EXPONENT: f64 = 45.0;
/// Below `UNDAMPED_HALF_PERIODS` half-periods up to the decay point the
/// whole integral is done adaptively.
const UNDAMPED_HALF_PERIODS: f64 = 8.0;
const SCAN_FACTOR: f64 = 1.25;
const TAIL_NODES: usize = 12;
/// Evaluations of one Gauss-Kronrod panel.
const SINGLE_PANEL: usize = 21;

fn tail_rule() -> &'static GaussRule {
    static RULE: OnceLock<GaussRule> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(TAIL_NODES).expect("fixed node count is valid"))
}

/// The exponent ψ of a normalised interference CF `exp(-ψ(u))`.
pub(crate) trait Exponent {
    fn psi(&self, u: f64) -> Complex64;
    fn dpsi(&self, u: f64) -> Complex64;
    /// Whether ψ is smooth at the origin, so the inversion integrand is too.
    fn smooth_at_origin(&self) -> bool {
        false
    }
}

/// `ψ(u) = κ β₁(u)`: interferers outside a ball, `κ = 2π λ R₀²`.
pub(crate) struct Scaled<'a> {
    pub kernel: &'a BetaKernel,
    pub kappa: f64,
}

impl Exponent for Scaled<'_> {
    fn psi(&self, u: f64) -> Complex64 {
        self.kappa * self.kernel.beta1(u)
    }
    fn dpsi(&self, u: f64) -> Complex64 {
        self.kappa * self.kernel.beta1_derivative(u)
    }
    fn smooth_at_origin(&self) -> bool {
        true
    }
}

/// `ψ(u) = u^{2/α} C / α`: interferers anywhere in the plane.
pub(crate) struct Unbounded {
    pub a: f64,
    pub coefficient: Complex64,
}

impl Exponent for Unbounded {
    fn psi(&self, u: f64) -> Complex64 {
        u.powf(self.a) * self.coefficient
    }
    fn dpsi(&self, u: f64) -> Complex64 {
        self.a * u.powf(self.a - 1.0) * self.coefficient
    }
}

/// Unclamped CDF value at normalised argument `xi`.
pub(crate) fn invert<E: Exponent>(
    e: &E,
    xi: f64,
    settings: &QuadratureSettings,
) -> Result<Integral<f64>, InterferenceError> {
    let integrand = |u: f64| {
        let z = (-e.psi(u) - Complex64::new(0.0, u * xi)).exp();
        z.im / u
    };
    let u_end = decay_point(e)?;
    let mut evaluations = 0;

    if xi.abs() * u_end <= UNDAMPED_HALF_PERIODS * PI {
        let r = integrate_geometric(&integrand, u_end, e.smooth_at_origin(), settings)?;
        return Ok(r.map(|v| 0.5 - v / PI));
    }

    let theta = |u: f64| -e.psi(u).im - u * xi;
    let dtheta = |u: f64| -e.dpsi(u).im - xi;
    let split = monotone_start(&dtheta, xi, u_end);
    if split >= u_end {
        let r = integrate_geometric(&integrand, u_end, e.smooth_at_origin(), settings)?;
        return Ok(r.map(|v| 0.5 - v / PI));
    }

    let direction = -xi.signum();
    let step = PI * direction;
    let start = theta(split);
    let mut target = if direction < 0.0 {
        (start / PI).floor() * PI
    } else {
        (start / PI).ceil() * PI
    };
    if target == start {
        target += step;
    }
    let bracket = 2.0 * PI / xi.abs();
    let mut zero = find_crossing(&theta, &dtheta, target, split, bracket)?;

    let head = integrate_geometric(&integrand, zero, e.smooth_at_origin(), settings)?;
    evaluations += head.evaluations;
    let mut converged = head.converged;
    let mut tail = AlternatingTail::new(head.value, settings);
    let mut status = TailStatus::Pending;
    for _ in 0..settings.oscillatory_period_batches {
        target += step;
        let next = find_crossing(&theta, &dtheta, target, zero, bracket)?;
        let piece = gauss_panel(&integrand, zero, next);
        evaluations += TAIL_NODES;
        status = tail.push(piece);
        zero = next;
        if status != TailStatus::Pending || zero > u_end {
            break;
        }
    }
    let value = if zero > u_end && status == TailStatus::Pending {
        tail.partial_sum()
    } else {
        tail.value()
    };
    if status == TailStatus::Pending && zero <= u_end {
        converged = false;
    }
    let error = head.error + if status == TailStatus::Accelerated { tail.spread() } else { 0.0 };
    Ok(Integral {
        value: 0.5 - value / PI,
        error: error / PI,
        converged,
        evaluations,
    })
}

/// Smallest power of two (times the start value 1) where `Re ψ` exceeds
/// the decay exponent.
fn decay_point<E: Exponent>(e: &E) -> Result<f64, InterferenceError> {
    let mut u = 1.0;
    let re = |u: f64| e.psi(u).re;
    if re(u) >= DECAY_EXPONENT {
        while u > 1e-300 && re(0.5 * u) >= DECAY_EXPONENT {
            u *= 0.5;
        }
        return Ok(u);
    }
    while re(u) < DECAY_EXPONENT {
        u *= 2.0;
        if u > 1e250 {
            return Err(InterferenceError::NonConvergence {
                what: "interference CF never decays",
                partial: f64::NAN,
            });
        }
    }
    Ok(u)
}

/// Point past which `θ` moves at least at half the linear rate.
fn monotone_start<D: Fn(f64) -> f64>(dtheta: &D, xi: f64, u_end: f64) -> f64 {
    let ok = |u: f64| -xi.signum() * dtheta(u) >= 0.5 * xi.abs();
    let mut grid = Vec::new();
    let mut u = u_end;
    let lowest = (1e-3 / xi.abs()).min(u_end * 1e-12);
    while u > lowest {
        grid.push(u);
        u /= SCAN_FACTOR;
    }
    grid.push(lowest);
    grid.reverse();
    let mut split = grid[0];
    for (i, &g) in grid.iter().enumerate() {
        if !ok(g) {
            split = grid.get(i + 1).copied().unwrap_or(u_end);
        }
    }
    split
}

/// Solves `θ(u) = target` for `u > from`, where θ is monotone with rate at
/// least `π / bracket`.
fn find_crossing<T, D>(theta: &T, dtheta: &D, target: f64, from: f64, bracket: f64) -> Result<f64, InterferenceError>
where
    T: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let f = |u: f64| theta(u) - target;
    let mut lo = from;
    let f_lo = f(lo);
    let mut hi = from + bracket;
    let mut f_hi = f(hi);
    let mut widen = 0;
    while f_lo * f_hi > 0.0 {
        lo = hi;
        hi += bracket * 2f64.powi(widen);
        f_hi = f(hi);
        widen += 1;
        if widen > 60 {
            return Err(InterferenceError::NonConvergence {
                what: "phase crossing bracket",
                partial: f64::NAN,
            });
        }
    }
    let rising = f_hi > 0.0;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == rising {
            hi = x;
        } else {
            lo = x;
        }
        let d = dtheta(x);
        let newton = x - fx / d;
        x = if d != 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= 1e-14 * hi || (fx / d).abs() <= 1e-14 * x {
            return Ok(x);
        }
    }
    Ok(x)
}

fn gauss_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    tail_rule().iter().map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

/// `∫_0^b f` on segments `[b 4^{-k-1}, b 4^{-k}]`, stopping once the
/// remaining piece near zero is below tolerance. For a smooth integrand the
/// walk also stops at the first segment resolved by a single panel.
fn integrate_geometric<F: Fn(f64) -> f64>(
    f: &F,
    b: f64,
    smooth: bool,
    settings: &QuadratureSettings,
) -> Result<Integral<f64>, InterferenceError> {
    let mut total = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    let mut converged = true;
    let mut hi = b;
    // The integrand is bounded near zero, so [0, lo] contributes at most
    // lo · sup|f|.
    for _ in 0..200 {
        let lo = 0.25 * hi;
        let piece = integrate_finite(f, lo, hi, settings)?;
        total += piece.value;
        error += piece.error;
        evaluations += piece.evaluations;
        converged &= piece.converged;
        let remainder = f(0.5 * lo).abs() * lo;
        let resolved = smooth && piece.converged && piece.evaluations <= SINGLE_PANEL;
        hi = lo;
        if resolved || remainder <= settings.abs_tol * 0.1 {
            break;
        }
    }
    let last = integrate_finite(f, 0.0, hi, settings)?;
    Ok(Integral {
        value: total + last.value,
        error: error + last.error,
        converged: converged && last.converged,
        evaluations: evaluations + last.evaluations,
    })
}
