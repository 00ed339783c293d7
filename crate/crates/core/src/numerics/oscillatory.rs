use std::f64::consts::PI;

use num_complex::Complex64;

use super::quadrature::{integrate_finite, QuadValue};
use super::{Integral, NumericsError, QuadratureSettings};

/// Number of trailing partial sums fed into the averaging transform.
const EULER_WINDOW: usize = 24;
const MIN_TAIL_TERMS: usize = 4;

/// Repeated averaging of partial sums (Euler transform in the
/// van Wijngaarden form). Exact for a constant sequence and very effective
/// on alternating series whose terms vary smoothly.
pub fn euler_accelerate<T: QuadValue>(partial_sums: &[T]) -> T {
    assert!(!partial_sums.is_empty(), "need at least one partial sum");
    let mut level: Vec<T> = partial_sums.to_vec();
    while level.len() > 1 {
        for i in 0..level.len() - 1 {
            level[i] = (level[i] + level[i + 1]) * 0.5;
        }
        level.pop();
    }
    level[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailStatus {
    Pending,
    /// Raw increments dropped below the truncation threshold.
    Truncated,
    /// Accelerated estimates stabilised.
    Accelerated,
}

/// Accumulates the half-period terms of an oscillatory tail and decides
/// when the (accelerated) sum has converged.
#[derive(Debug, Clone)]
pub struct AlternatingTail<T> {
    sums: Vec<T>,
    estimates: Vec<T>,
    small_increments: usize,
    threshold: f64,
    abs_tol: f64,
    status: TailStatus,
}

impl<T: QuadValue> AlternatingTail<T> {
    pub fn new(head: T, settings: &QuadratureSettings) -> Self {
        Self {
            sums: vec![head],
            estimates: Vec::new(),
            small_increments: 0,
            threshold: settings.tail_truncation_threshold,
            abs_tol: settings.abs_tol,
            status: TailStatus::Pending,
        }
    }

    pub fn terms(&self) -> usize {
        self.sums.len() - 1
    }

    pub fn status(&self) -> TailStatus {
        self.status
    }

    fn tolerance(&self, magnitude: f64) -> f64 {
        self.abs_tol.max(self.threshold * magnitude)
    }

    /// Adds one term; returns the status after the update.
    pub fn push(&mut self, term: T) -> TailStatus {
        let last = *self.sums.last().expect("non-empty");
        let sum = last + term;
        self.sums.push(sum);
        if term.magnitude() <= self.tolerance(sum.magnitude()) {
            self.small_increments += 1;
        } else {
            self.small_increments = 0;
        }
        if self.small_increments >= 2 {
            self.status = TailStatus::Truncated;
            return self.status;
        }
        if self.terms() >= MIN_TAIL_TERMS {
            let start = self.sums.len().saturating_sub(EULER_WINDOW);
            let estimate = euler_accelerate(&self.sums[start..]);
            self.estimates.push(estimate);
            let n = self.estimates.len();
            if n >= 3 {
                let tol = self.tolerance(estimate.magnitude());
                let d1 = (self.estimates[n - 1] - self.estimates[n - 2]).magnitude();
                let d2 = (self.estimates[n - 2] - self.estimates[n - 3]).magnitude();
                if d1 <= tol && d2 <= tol {
                    self.status = TailStatus::Accelerated;
                }
            }
        }
        self.status
    }

    /// Best current estimate of the full sum.
    pub fn value(&self) -> T {
        match self.status {
            TailStatus::Truncated => *self.sums.last().expect("non-empty"),
            _ => self
                .estimates
                .last()
                .copied()
                .unwrap_or_else(|| *self.sums.last().expect("non-empty")),
        }
    }

    /// Plain running sum, without acceleration.
    pub fn partial_sum(&self) -> T {
        *self.sums.last().expect("non-empty")
    }

    /// Spread of the last accelerated estimates, used as an error proxy.
    pub fn spread(&self) -> f64 {
        let n = self.estimates.len();
        if n < 2 {
            return f64::INFINITY;
        }
        (self.estimates[n - 1] - self.estimates[n - 2]).magnitude()
    }
}

/// Integrates `f` over `[0, ∞)` where `f` oscillates with a known
/// half-period in its tail.
///
/// `[0, split]` is integrated adaptively; the remainder is summed in
/// batches of one half-period each and accelerated with
/// [`euler_accelerate`]. Running out of batches returns the best estimate
/// with `converged == false`.
pub fn integrate_semi_infinite_oscillatory<F>(
    f: F,
    split: f64,
    half_period: f64,
    settings: &QuadratureSettings,
) -> Result<Integral<f64>, NumericsError>
where
    F: Fn(f64) -> f64,
{
    if !(split.is_finite() && split >= 0.0) {
        return Err(NumericsError::InvalidParameter(format!(
            "split point must be finite and >= 0, got {split}"
        )));
    }
    if !(half_period.is_finite() && half_period > 0.0) {
        return Err(NumericsError::InvalidParameter(format!(
            "half period must be finite and > 0, got {half_period}"
        )));
    }
    settings.validate()?;

    let mut evaluations = 0;
    let mut converged = true;
    let head = if split > 0.0 {
        let h = integrate_finite(&f, 0.0, split, settings)?;
        evaluations += h.evaluations;
        converged &= h.converged;
        h.value
    } else {
        0.0
    };

    let mut tail = AlternatingTail::new(head, settings);
    let mut a = split;
    for _ in 0..settings.oscillatory_period_batches {
        let b = a + half_period;
        let piece = integrate_finite(&f, a, b, settings)?;
        evaluations += piece.evaluations;
        converged &= piece.converged;
        if tail.push(piece.value) != TailStatus::Pending {
            return Ok(Integral {
                value: tail.value(),
                error: tail.spread().min(piece.error.max(piece.value.abs())),
                converged,
                evaluations,
            });
        }
        a = b;
    }
    Ok(Integral {
        value: tail.value(),
        error: tail.spread(),
        converged: false,
        evaluations,
    })
}

/// How the removable singularity of the inversion integrand at ω = 0 is
/// treated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OriginHandling {
    /// Use the analytic limit of the integrand (`E[X] - x`) below a tiny ω.
    Limit(f64),
    /// Start the integral at this small positive ω.
    Offset(f64),
}

/// CDF of a real random variable from its characteristic function:
/// `F(x) = 1/2 - (1/π) ∫_0^∞ Im[φ(ω) e^{-jωx}] / ω dω`.
///
/// `scale` is a characteristic frequency of `φ` (roughly one over the
/// spread of the variable); it sets the head length and the step used when
/// `x = 0`. The returned value is not clamped to `[0, 1]`.
pub fn gil_pelaez_cdf<C>(
    cf: C,
    x: f64,
    scale: f64,
    origin: OriginHandling,
    settings: &QuadratureSettings,
) -> Result<Integral<f64>, NumericsError>
where
    C: Fn(f64) -> Complex64,
{
    if !(scale.is_finite() && scale > 0.0) {
        return Err(NumericsError::InvalidParameter(format!(
            "frequency scale must be finite and > 0, got {scale}"
        )));
    }
    let raw = |w: f64| (cf(w) * Complex64::new(0.0, -w * x).exp()).im / w;
    let half_period = if x != 0.0 { PI / x.abs() } else { PI / scale };
    let split = (2.0 * half_period).max(8.0 / scale);
    let inner = match origin {
        OriginHandling::Limit(limit) => {
            let cutoff = 1e-8 / scale;
            integrate_semi_infinite_oscillatory(
                |w| if w < cutoff { limit } else { raw(w) },
                split,
                half_period,
                settings,
            )?
        }
        OriginHandling::Offset(offset) => {
            if !(offset > 0.0 && offset < split) {
                return Err(NumericsError::InvalidParameter(format!(
                    "origin offset {offset} must lie in (0, {split})"
                )));
            }
            let shifted = integrate_semi_infinite_oscillatory(
                |t| raw(t + offset),
                split - offset,
                half_period,
                settings,
            )?;
            shifted
        }
    };
    Ok(inner.map(|v| 0.5 - v / PI))
}
