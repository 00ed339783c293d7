//! Expected rate per Hz under the gap model `ρ = ln(1 + γ/γ₀)`, in nats.
//!
//! Two routes are provided. [`rate_from_ccdf`] works from a sampled SINR
//! CCDF; [`rate_direct`] integrates the interference CDF over contact
//! distance, serving gain and rate level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{CcdfCurve, ChannelSpec, CoverageError, CoverageOptions, Engine, RadialRule};
use crate::interference::NetworkConfig;
use crate::numerics::{integrate_finite, NumericsError, QuadratureSettings};

/// Allowed relative gap between the by-parts and derivative forms.
pub const CCDF_FORM_AGREEMENT: f64 = 0.02;
/// Step of the interference-CDF tables in `ln ξ`.
const TABLE_STEP: f64 = 0.05;
/// Lowest SINR threshold integrated explicitly, relative to γ₀.
const THETA_FLOOR: f64 = 1e-9;
const CDF_NEGLIGIBLE: f64 = 1e-14;
/// Absolute contribution, after the contact-node weight, below which a
/// table tail is dropped.
const WEIGHTED_NEGLIGIBLE: f64 = 1e-9;
const SATURATION_STRIDE: f64 = 1.0;
/// Lower edge of the extrapolation allowed left of a sampled curve.
const LEFT_EXTENSION_BOUND: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("invalid rate parameters: {0}")]
    Params(String),
    #[error("curve ends at {have:e} with coverage {coverage:.3e}; extend it to at least {need:e}")]
    UpperCoverage { have: f64, need: f64, coverage: f64 },
    #[error("curve starts at {have:e} with coverage {coverage:.4}; extend it down towards {need:e}")]
    LowerCoverage { have: f64, need: f64, coverage: f64 },
    #[error("curve needs at least two points")]
    TooShort,
    #[error("by-parts rate {by_parts} and derivative rate {derivative} differ by more than 2%")]
    Inconsistent { by_parts: f64, derivative: f64 },
    #[error(transparent)]
    Coverage(#[from] CoverageError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    /// SINR gap γ₀ > 0, linear.
    pub gamma_o: f64,
    /// Minimum usable SINR γ_min ≥ 0, linear.
    pub gamma_min: f64,
}

impl RateParams {
    pub fn new(gamma_o: f64, gamma_min: f64) -> Result<Self, RateError> {
        let p = Self { gamma_o, gamma_min };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), RateError> {
        if !(self.gamma_o.is_finite() && self.gamma_o > 0.0) {
            return Err(RateError::Params(format!("gamma_o must be > 0, got {}", self.gamma_o)));
        }
        if !(self.gamma_min >= 0.0) || self.gamma_min.is_nan() {
            return Err(RateError::Params(format!(
                "gamma_min must be >= 0, got {}",
                self.gamma_min
            )));
        }
        Ok(())
    }

    /// `ρ_min = ln(1 + γ_min/γ₀)`.
    pub fn rho_min(&self) -> f64 {
        (self.gamma_min / self.gamma_o).ln_1p()
    }
}

/// Rate from a sampled CCDF by both integration routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcdfRate {
    /// `ρ_min F^c(γ_min) + ∫_{γ_min}^∞ F^c(v)/(γ₀+v) dv`; the reported value.
    pub by_parts: f64,
    /// `∫_{γ_min}^∞ ln(1+v/γ₀) f(v) dv` with `f` from central differences.
    pub derivative: f64,
}

impl CcdfRate {
    pub fn value(&self) -> f64 {
        self.by_parts
    }
}

/// `E[ρ · 1{γ > γ_min}]` split into the part above `ρ_min` and the
/// `ρ_min P[γ > γ_min]` floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBreakdown {
    /// `∫_{ρ_min}^∞ P[ρ > v] dv = E[(ρ - ρ_min)⁺]`.
    pub excess: f64,
    /// `ρ_min · p_c(γ_min)`.
    pub boundary: f64,
    pub total: f64,
    pub gamma_min: f64,
    /// Interference-CDF table entries that failed or did not converge.
    pub failed_nodes: usize,
}

fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let (x0, x1) = (xs[i - 1], xs[i]);
    ys[i - 1] + (ys[i] - ys[i - 1]) * (x - x0) / (x1 - x0)
}

/// `∫_{t_n}^∞ F_n (t_n/v)^p / (γ₀+v) dv` for a power-law CCDF tail.
fn power_tail(t_n: f64, f_n: f64, p: f64, gamma_o: f64) -> Result<f64, RateError> {
    if f_n <= 0.0 {
        return Ok(0.0);
    }
    let s = QuadratureSettings::default();
    // w = ln(v/t_n)
    let span = 40.0 / p;
    let r = integrate_finite(
        |w: f64| {
            let v = t_n * w.exp();
            f_n * (-p * w).exp() * v / (gamma_o + v)
        },
        0.0,
        span,
        &s,
    )?;
    Ok(r.value)
}

/// Expected rate from a sampled CCDF.
///
/// The curve must reach a coverage below 0.01 at its last threshold and,
/// left of its first threshold, must be close enough to its value there
/// that a constant extension down to γ_min is accurate.
pub fn rate_from_ccdf(curve: &CcdfCurve, params: &RateParams) -> Result<CcdfRate, RateError> {
    params.validate()?;
    let (ts, ps) = (&curve.thresholds, &curve.probabilities);
    if ts.len() < 2 {
        return Err(RateError::TooShort);
    }
    let g0 = params.gamma_o;
    let gmin = params.gamma_min;
    let n = ts.len();
    if ps[n - 1] >= 0.01 {
        let (t1, t2, f1, f2) = (ts[n - 2], ts[n - 1], ps[n - 2], ps[n - 1]);
        let p = if f1 > 0.0 && f2 > 0.0 { -(f2 / f1).ln() / (t2 / t1).ln() } else { 1.0 };
        let need = if p > 0.0 { t2 * (f2 / 0.01).powf(1.0 / p) } else { f64::INFINITY };
        return Err(RateError::UpperCoverage {
            have: t2,
            need,
            coverage: f2,
        });
    }
    if gmin >= ts[n - 1] {
        return Ok(CcdfRate {
            by_parts: 0.0,
            derivative: 0.0,
        });
    }

    // restrict to [γ_min, ∞): values at γ_min by interpolation or constant
    // extension on the left
    let mut vs = Vec::with_capacity(n + 1);
    let mut fs = Vec::with_capacity(n + 1);
    if gmin < ts[0] {
        let slack = (1.0 - ps[0]) * ((g0 + ts[0]) / (g0 + gmin)).ln();
        if slack > LEFT_EXTENSION_BOUND * (1.0 + (ts[0] / g0).ln_1p()) && ps[0] > 0.0 {
            return Err(RateError::LowerCoverage {
                have: ts[0],
                need: gmin.max(ts[0] * 1e-3),
                coverage: ps[0],
            });
        }
        vs.push(gmin);
        fs.push(ps[0]);
    } else {
        vs.push(gmin);
        fs.push(interp_linear(ts, ps, gmin));
    }
    for (&t, &p) in ts.iter().zip(ps) {
        if t > gmin {
            vs.push(t);
            fs.push(p);
        }
    }
    let m = vs.len();

    // tail beyond the last point
    let (t1, t2, f1, f2) = (vs[m - 2], vs[m - 1], fs[m - 2], fs[m - 1]);
    let tail = if f2 <= 0.0 {
        0.0
    } else {
        let p = if f1 > f2 { (f1 / f2).ln() / (t2 / t1).ln() } else { 0.0 };
        if p <= 0.05 {
            return Err(RateError::UpperCoverage {
                have: t2,
                need: t2 * 10.0,
                coverage: f2,
            });
        }
        power_tail(t2, f2, p, g0)?
    };

    // by parts: trapezoid in ln v on positive thresholds, linear in v on a
    // piece starting at 0
    let h = |v: f64, f: f64| f / (g0 + v);
    let mut by_parts = params.rho_min() * fs[0] + tail;
    for i in 1..m {
        let (a, b) = (vs[i - 1], vs[i]);
        if a > 0.0 {
            let da = (b / a).ln();
            by_parts += 0.5 * da * (h(a, fs[i - 1]) * a + h(b, fs[i]) * b);
        } else {
            by_parts += 0.5 * (b - a) * (h(a, fs[i - 1]) + h(b, fs[i]));
        }
    }

    // derivative form
    let rho = |v: f64| (v / g0).ln_1p();
    let dens: Vec<f64> = (0..m)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(m - 1));
            -(fs[hi] - fs[lo]) / (vs[hi] - vs[lo])
        })
        .collect();
    let mut derivative = rho(vs[m - 1]) * fs[m - 1] + tail;
    for i in 1..m {
        derivative += 0.5 * (vs[i] - vs[i - 1]) * (rho(vs[i - 1]) * dens[i - 1] + rho(vs[i]) * dens[i]);
    }

    let scale = by_parts.abs().max(derivative.abs());
    if scale > 1e-12 && (by_parts - derivative).abs() > CCDF_FORM_AGREEMENT * scale {
        return Err(RateError::Inconsistent {
            by_parts,
            derivative,
        });
    }
    Ok(CcdfRate {
        by_parts,
        derivative,
    })
}

/// `F_I(ξ | s)` on a uniform `ln ξ` grid for one contact node.
struct CdfTable {
    ln_lo: f64,
    values: Vec<f64>,
    failed: usize,
}

impl CdfTable {
    /// Tabulates downward from `ln_hi`. Entries above the point where
    /// `1 - F` drops below a weight-scaled tolerance are replaced by the top
    /// value, and the table stops once `F` itself is negligible.
    fn build(engine: &Engine, s: f64, weight: f64, ln_hi: f64) -> Self {
        let mut failed = 0;
        let mut eval = |l: f64| match engine.cdf(s, l.exp()) {
            Ok(v) => {
                if !v.converged {
                    failed += 1;
                }
                v.value
            }
            Err(e) => {
                log::warn!("interference CDF failed at s={s}, ln xi={l}: {e}");
                failed += 1;
                0.0
            }
        };
        let weight = weight.max(f64::MIN_POSITIVE);
        let saturated = (WEIGHTED_NEGLIGIBLE / weight).clamp(CDF_NEGLIGIBLE, 1e-3);
        let vanished = (WEIGHTED_NEGLIGIBLE / weight).clamp(CDF_NEGLIGIBLE, 1e-5);

        let mut top = ln_hi;
        let mut v = eval(top);
        while 1.0 - v < saturated {
            let next = eval(top - SATURATION_STRIDE);
            if 1.0 - next >= saturated {
                break;
            }
            top -= SATURATION_STRIDE;
            v = next;
        }

        let mut values = vec![v];
        let mut l = top;
        while !(values.len() > 4 && v < vanished) && values.len() <= 4000 {
            l -= TABLE_STEP;
            v = eval(l);
            values.push(v);
        }
        values.reverse();
        Self {
            ln_lo: l,
            values,
            failed,
        }
    }

    /// Four-point Lagrange interpolation in `ln ξ`; zero below the table and
    /// the top value above it.
    fn eval(&self, xi: f64) -> f64 {
        if xi <= 0.0 {
            return 0.0;
        }
        let n = self.values.len();
        let pos = (xi.ln() - self.ln_lo) / TABLE_STEP;
        if pos <= 0.0 {
            return if pos > -1e-9 { self.values[0] } else { 0.0 };
        }
        if pos >= (n - 1) as f64 {
            return self.values[n - 1];
        }
        if n < 4 {
            let i = (pos.floor() as usize).min(n - 2);
            let x = pos - i as f64;
            return (self.values[i] * (1.0 - x) + self.values[i + 1] * x).clamp(0.0, 1.0);
        }
        let i = (pos.floor() as usize).clamp(1, n - 3);
        let x = pos - i as f64;
        let (ym, y0, y1, y2) = (self.values[i - 1], self.values[i], self.values[i + 1], self.values[i + 2]);
        let v = -ym * x * (x - 1.0) * (x - 2.0) / 6.0 + y0 * (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0
            - y1 * (x + 1.0) * x * (x - 2.0) / 2.0
            + y2 * (x + 1.0) * x * (x - 1.0) / 6.0;
        v.clamp(0.0, 1.0)
    }
}

/// Composite Simpson on `[a, b]` with about `TABLE_STEP` spacing.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut n = ((b - a) / TABLE_STEP).ceil() as usize;
    n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

struct DirectRate {
    engine: Engine,
    tables: Vec<CdfTable>,
}

impl DirectRate {
    fn new(cfg: &NetworkConfig, spec: &ChannelSpec, gamma_o: f64, lowest: f64, opts: &CoverageOptions) -> Result<Self, RateError> {
        let engine = Engine::new(cfg, spec, opts)?;
        let g_max = engine.gain_nodes.iter().map(|p| p.0).fold(0.0, f64::max);
        let theta_lo = lowest.max(THETA_FLOOR * gamma_o);
        let ln_hi = (g_max / theta_lo).ln() + 2.0 * TABLE_STEP;
        let tables = engine
            .s_nodes
            .par_iter()
            .map(|&(s, w)| CdfTable::build(&engine, s, w, ln_hi))
            .collect();
        Ok(Self { engine, tables })
    }

    fn evaluate(&self, params: &RateParams) -> RateBreakdown {
        let g0 = params.gamma_o;
        let theta_lo = params.gamma_min.max(THETA_FLOOR * g0);
        let mut excess = 0.0;
        let mut coverage = 0.0;
        for (table, &(s, ws)) in self.tables.iter().zip(&self.engine.s_nodes) {
            for &(g, wg) in &self.engine.gain_nodes {
                let f = |theta: f64| self.engine.xi(s, g, theta).map_or(0.0, |xi| table.eval(xi));
                let tau_lo = theta_lo.ln();
                let tau_hi = g.ln() - table.ln_lo;
                let mut inner = simpson(
                    |tau| {
                        let theta = tau.exp();
                        f(theta) * theta / (g0 + theta)
                    },
                    tau_lo,
                    tau_hi.max(tau_lo),
                );
                if params.gamma_min < theta_lo {
                    // thresholds below the floor succeed with probability ≈ f(θ_lo)
                    inner += f(theta_lo) * (theta_lo / g0).ln_1p();
                }
                excess += ws * wg * inner;
                if params.gamma_min > 0.0 {
                    coverage += ws * wg * f(params.gamma_min);
                }
            }
        }
        let boundary = params.rho_min() * coverage;
        RateBreakdown {
            excess,
            boundary,
            total: excess + boundary,
            gamma_min: params.gamma_min,
            failed_nodes: self.tables.iter().map(|t| t.failed).sum(),
        }
    }
}

/// Options suited to rate integrals: the geometric radial rule, since a
/// noticeable part of the rate comes from thresholds far above 0 dB.
pub fn rate_options() -> CoverageOptions {
    CoverageOptions {
        radial: RadialRule::Geometric,
        ..CoverageOptions::default()
    }
}

/// Expected rate `E[ρ · 1{γ > γ_min}]` by direct integration.
pub fn rate_direct(
    cfg: &NetworkConfig,
    spec: &ChannelSpec,
    params: &RateParams,
    opts: &CoverageOptions,
) -> Result<RateBreakdown, RateError> {
    params.validate()?;
    let d = DirectRate::new(cfg, spec, params.gamma_o, params.gamma_min, opts)?;
    Ok(d.evaluate(params))
}

/// [`rate_direct`] over a grid of γ_min, sharing the interference tables.
pub fn rate_vs_gamma_min(
    cfg: &NetworkConfig,
    spec: &ChannelSpec,
    gamma_o: f64,
    gamma_min_grid: &[f64],
    opts: &CoverageOptions,
) -> Result<Vec<RateBreakdown>, RateError> {
    let params: Vec<RateParams> = gamma_min_grid
        .iter()
        .map(|&g| RateParams::new(gamma_o, g))
        .collect::<Result<_, _>>()?;
    for (i, w) in gamma_min_grid.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(CoverageError::NotIncreasing(i + 1).into());
        }
    }
    if params.is_empty() {
        return Ok(Vec::new());
    }
    let lowest = gamma_min_grid[0];
    let d = DirectRate::new(cfg, spec, gamma_o, lowest, opts)?;
    Ok(params.iter().map(|p| d.evaluate(p)).collect())
}
