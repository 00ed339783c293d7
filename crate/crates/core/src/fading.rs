//! Channel power-gain distributions.
//!
//! A [`FadingModel`] describes the random power gain of one link (fast
//! fading, shadowing or their product). The transmitted power enters
//! through [`PowerVariable`], which represents `P = P₀·g·h`.

use std::f64::consts::{LN_10, PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::special::bessel_i0_scaled;
use crate::numerics::{
    gauss_hermite, gauss_laguerre, integrate_finite, NumericsError, QuadratureSettings,
    MAX_GAUSS_NODES,
};

/// Standard-normal range covered by the lognormal CF integral.
const LOGNORMAL_CF_RANGE: f64 = 10.0;
/// Phase rate (radians per unit of the normal variable) beyond which the
/// lognormal CF switches to its asymptotic tail.
const LOGNORMAL_FAST_PHASE: f64 = 500.0;
/// Nodes per component when a product needs a nested expectation.
const PRODUCT_INNER_NODES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FadingError {
    #[error("gain must be >= 0, got {0}")]
    NegativeGain(f64),
    #[error("invalid fading parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FadingModel {
    /// No fading: the gain is exactly 1.
    Deterministic,
    /// Unit-mean exponential power gain.
    Rayleigh,
    /// Unit-mean Rician power gain with linear K factor.
    Rician { k_factor: f64 },
    /// `g = exp(σN)` with `σ = ln(10)/10 · sigma_db`.
    LognormalShadow { sigma_db: f64 },
    /// Product of two independent gains.
    Product {
        first: Box<FadingModel>,
        second: Box<FadingModel>,
    },
}

/// Value of a probability density, or the location of an atom for models
/// without a density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    Continuous(f64),
    PointMass { at: f64 },
}

impl Density {
    /// Density value; `None` for a point mass.
    pub fn value(self) -> Option<f64> {
        match self {
            Density::Continuous(v) => Some(v),
            Density::PointMass { .. } => None,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl FadingModel {
    pub fn rician_db(k_db: f64) -> Self {
        FadingModel::Rician {
            k_factor: db_to_linear(k_db),
        }
    }

    pub fn product(first: FadingModel, second: FadingModel) -> Self {
        FadingModel::Product {
            first: Box::new(first),
            second: Box::new(second),
        }
    }

    pub fn validate(&self) -> Result<(), FadingError> {
        match self {
            FadingModel::Deterministic | FadingModel::Rayleigh => Ok(()),
            FadingModel::Rician { k_factor } => {
                if k_factor.is_finite() && *k_factor >= 0.0 {
                    Ok(())
                } else {
                    Err(FadingError::InvalidParameter(format!(
                        "Rician K factor must be finite and >= 0, got {k_factor}"
                    )))
                }
            }
            FadingModel::LognormalShadow { sigma_db } => {
                if sigma_db.is_finite() && *sigma_db > 0.0 {
                    Ok(())
                } else {
                    Err(FadingError::InvalidParameter(format!(
                        "shadowing sigma_db must be finite and > 0, got {sigma_db}"
                    )))
                }
            }
            FadingModel::Product { first, second } => {
                first.validate()?;
                second.validate()
            }
        }
    }

    /// Short human-readable description, stable across runs.
    pub fn label(&self) -> String {
        match self {
            FadingModel::Deterministic => "deterministic".into(),
            FadingModel::Rayleigh => "rayleigh".into(),
            FadingModel::Rician { k_factor } => format!("rician(K={k_factor})"),
            FadingModel::LognormalShadow { sigma_db } => format!("lognormal({sigma_db} dB)"),
            FadingModel::Product { first, second } => {
                format!("{}*{}", first.label(), second.label())
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            FadingModel::Deterministic | FadingModel::Rayleigh | FadingModel::Rician { .. } => 1.0,
            FadingModel::LognormalShadow { sigma_db } => {
                let s = lognormal_sigma(*sigma_db);
                (0.5 * s * s).exp()
            }
            FadingModel::Product { first, second } => first.mean() * second.mean(),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            FadingModel::Deterministic => 1.0,
            FadingModel::Rayleigh => 2.0,
            FadingModel::Rician { k_factor } => {
                let k = *k_factor;
                (k * k + 4.0 * k + 2.0) / ((k + 1.0) * (k + 1.0))
            }
            FadingModel::LognormalShadow { sigma_db } => {
                let s = lognormal_sigma(*sigma_db);
                (2.0 * s * s).exp()
            }
            FadingModel::Product { first, second } => first.second_moment() * second.second_moment(),
        }
    }

    /// True when the characteristic function has a closed form.
    pub fn has_closed_form_cf(&self) -> bool {
        matches!(
            self,
            FadingModel::Deterministic | FadingModel::Rayleigh | FadingModel::Rician { .. }
        )
    }

    /// Collapses products with a deterministic factor.
    pub fn simplified(&self) -> FadingModel {
        match self {
            FadingModel::Product { first, second } => {
                match (first.simplified(), second.simplified()) {
                    (FadingModel::Deterministic, other) | (other, FadingModel::Deterministic) => other,
                    (a, b) => FadingModel::product(a, b),
                }
            }
            other => other.clone(),
        }
    }

    pub fn pdf(&self, x: f64) -> Result<Density, FadingError> {
        if !(x >= 0.0) {
            return Err(FadingError::NegativeGain(x));
        }
        let value = match self.simplified() {
            FadingModel::Deterministic => return Ok(Density::PointMass { at: 1.0 }),
            FadingModel::Rayleigh => (-x).exp(),
            FadingModel::Rician { k_factor } => rician_pdf(k_factor, x),
            FadingModel::LognormalShadow { sigma_db } => lognormal_pdf(lognormal_sigma(sigma_db), x),
            FadingModel::Product { first, second } => product_pdf(&first, &second, x)?,
        };
        Ok(Density::Continuous(value))
    }

    /// `P(h ≤ x)`. Closed form where available, otherwise the density is
    /// integrated numerically.
    pub fn cdf(&self, x: f64) -> Result<f64, FadingError> {
        if x < 0.0 {
            return Ok(0.0);
        }
        match self.simplified() {
            FadingModel::Deterministic => Ok(if x >= 1.0 { 1.0 } else { 0.0 }),
            FadingModel::Rayleigh => Ok(-(-x).exp_m1()),
            model => {
                if x == 0.0 {
                    return Ok(0.0);
                }
                // Integrate in ln x so that both the lognormal and the
                // exponential tails are well resolved.
                let settings = QuadratureSettings {
                    rel_tol: 1e-10,
                    abs_tol: 1e-13,
                    ..QuadratureSettings::default()
                };
                let upper = x.ln();
                let lower = upper.min(0.0) - 60.0;
                let r = integrate_finite(
                    |t: f64| {
                        let y = t.exp();
                        model.pdf(y).ok().and_then(Density::value).unwrap_or(0.0) * y
                    },
                    lower,
                    upper,
                    &settings,
                )?;
                Ok(r.value.clamp(0.0, 1.0))
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            FadingModel::Deterministic => 1.0,
            FadingModel::Rayleigh => rng.sample(Exp1),
            FadingModel::Rician { k_factor } => {
                let k = *k_factor;
                let los = (k / (k + 1.0)).sqrt();
                let sd = (0.5 / (k + 1.0)).sqrt();
                let re: f64 = los + sd * rng.sample::<f64, _>(StandardNormal);
                let im: f64 = sd * rng.sample::<f64, _>(StandardNormal);
                re * re + im * im
            }
            FadingModel::LognormalShadow { sigma_db } => {
                let n: f64 = rng.sample(StandardNormal);
                (lognormal_sigma(*sigma_db) * n).exp()
            }
            FadingModel::Product { first, second } => first.sample(rng) * second.sample(rng),
        }
    }

    /// Characteristic function `E[exp(j t h)]` of the unit-power gain.
    pub fn cf(&self, t: f64) -> Complex64 {
        if t == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        match self {
            FadingModel::Deterministic => Complex64::new(0.0, t).exp(),
            FadingModel::Rayleigh => Complex64::new(1.0, 0.0) / Complex64::new(1.0, -t),
            FadingModel::Rician { k_factor } => {
                let k1 = k_factor + 1.0;
                let denom = Complex64::new(k1, -t);
                (k1 / denom) * (Complex64::new(0.0, k_factor * t) / denom).exp()
            }
            FadingModel::LognormalShadow { sigma_db } => lognormal_cf(lognormal_sigma(*sigma_db), t),
            FadingModel::Product { first, second } => {
                let (outer, inner) = if second.has_closed_form_cf() && !first.has_closed_form_cf() {
                    (first, second)
                } else {
                    (second, first)
                };
                let nodes = outer
                    .expectation_nodes(PRODUCT_INNER_NODES)
                    .expect("fixed node count is valid");
                nodes.iter().map(|&(g, w)| w * inner.cf(t * g)).sum()
            }
        }
    }

    /// `1 - E[exp(j t h)]` without the cancellation of forming the CF first.
    pub fn one_minus_cf(&self, t: f64) -> Complex64 {
        match self {
            FadingModel::Deterministic => {
                let half = (0.5 * t).sin();
                Complex64::new(2.0 * half * half, -t.sin())
            }
            FadingModel::Rayleigh => Complex64::new(0.0, -t) / Complex64::new(1.0, -t),
            FadingModel::Rician { k_factor } => {
                // φ = e^{Kp/(1-p)} / (1-p) with p = jt/(K+1)
                let one = Complex64::new(1.0, 0.0);
                let p = Complex64::new(0.0, t / (k_factor + 1.0));
                let w = *k_factor * p / (one - p);
                (-p - expm1(w)) / (one - p)
            }
            _ => Complex64::new(1.0, 0.0) - self.cf(t),
        }
    }

    /// Nodes and weights with `Σ wᵢ f(xᵢ) ≈ E[f(h)]`.
    pub fn expectation_nodes(&self, n: usize) -> Result<Vec<(f64, f64)>, FadingError> {
        if n == 0 || n > MAX_GAUSS_NODES {
            return Err(NumericsError::NodeCount {
                n,
                max: MAX_GAUSS_NODES,
            }
            .into());
        }
        self.validate()?;
        match self {
            FadingModel::Deterministic => Ok(vec![(1.0, 1.0)]),
            FadingModel::Rayleigh => Ok(gauss_laguerre(n, 1.0)?.iter().collect()),
            FadingModel::Rician { k_factor } => rician_nodes(*k_factor, n),
            FadingModel::LognormalShadow { sigma_db } => lognormal_nodes(*sigma_db, n),
            FadingModel::Product { first, second } => {
                let a = first.expectation_nodes(n)?;
                let b = second.expectation_nodes(n)?;
                let mut out = Vec::with_capacity(a.len() * b.len());
                for &(x, wx) in &a {
                    for &(y, wy) in &b {
                        out.push((x * y, wx * wy));
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Transmit power times a fading gain: `P = P₀·g·h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerVariable {
    pub base_power: f64,
    pub fading: FadingModel,
}

impl PowerVariable {
    pub fn new(base_power: f64, fading: FadingModel) -> Result<Self, FadingError> {
        if !(base_power.is_finite() && base_power > 0.0) {
            return Err(FadingError::InvalidParameter(format!(
                "base power must be finite and > 0, got {base_power}"
            )));
        }
        fading.validate()?;
        Ok(Self { base_power, fading })
    }

    pub fn mean(&self) -> f64 {
        self.base_power * self.fading.mean()
    }

    pub fn cf(&self, t: f64) -> Complex64 {
        self.fading.cf(t * self.base_power)
    }
}

/// `E[exp(j t P₀ g h)]`.
pub fn cf_power(pv: &PowerVariable, t: f64) -> Complex64 {
    pv.cf(t)
}

fn expm1(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    let em1 = z.re.exp_m1();
    Complex64::new(em1 * c - 2.0 * half * half, z.re.exp() * s)
}

pub(crate) fn lognormal_sigma(sigma_db: f64) -> f64 {
    LN_10 / 10.0 * sigma_db
}

fn rician_pdf(k: f64, x: f64) -> f64 {
    let k1 = k + 1.0;
    let z = 2.0 * (x * k * k1).sqrt();
    k1 * (-x * k1 - k + z).exp() * bessel_i0_scaled(z)
}

fn lognormal_pdf(sigma: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let l = x.ln();
    (-(l * l) / (2.0 * sigma * sigma)).exp() / (x * sigma * (2.0 * PI).sqrt())
}

/// `E[exp(j t e^{σZ})]`, Z standard normal.
///
/// Adaptive quadrature over Z up to the point where the phase `t e^{σZ}`
/// turns faster than `LOGNORMAL_FAST_PHASE` per unit Z; the remainder is an
/// integral of `e^{jy}` against a smooth, rapidly decaying amplitude and is
/// taken from three terms of repeated integration by parts.
fn lognormal_cf(sigma: f64, t: f64) -> Complex64 {
    if t < 0.0 {
        return lognormal_cf(sigma, -t).conj();
    }
    let settings = QuadratureSettings {
        rel_tol: 1e-11,
        abs_tol: 1e-14,
        max_subdivisions: 20_000,
        ..QuadratureSettings::default()
    };
    let norm = (2.0 * PI).sqrt();
    let phi = |z: f64| (-0.5 * z * z).exp() / norm;
    let cutoff = ((LOGNORMAL_FAST_PHASE / (t * sigma)).ln() / sigma).clamp(-LOGNORMAL_CF_RANGE, LOGNORMAL_CF_RANGE);

    let mut total = Complex64::new(0.0, 0.0);
    let mut a = -LOGNORMAL_CF_RANGE;
    while a < cutoff {
        let b = (a + 1.0).min(cutoff);
        let piece = integrate_finite(
            |z: f64| Complex64::new(0.0, t * (sigma * z).exp()).exp() * phi(z),
            a,
            b,
            &settings,
        );
        match piece {
            Ok(p) => total += p.value,
            Err(_) => return Complex64::new(f64::NAN, f64::NAN),
        }
        a = b;
    }
    if cutoff < LOGNORMAL_CF_RANGE {
        // y = t e^{σz}: ∫ e^{jy} A(y) dy with A = φ(z)/(σ y)
        let y0 = t * (sigma * cutoff).exp();
        let amp = phi(cutoff) / (sigma * y0);
        let b = (cutoff / sigma + 1.0) / y0;
        let db = (1.0 / (sigma * sigma) - cutoff / sigma - 1.0) / (y0 * y0);
        let d1 = -amp * b;
        let d2 = amp * (b * b - db);
        let j = Complex64::new(0.0, 1.0);
        total += Complex64::new(0.0, y0).exp() * (j * amp - d1 - j * d2);
    }
    total
}

fn product_pdf(a: &FadingModel, b: &FadingModel, x: f64) -> Result<f64, FadingError> {
    let settings = QuadratureSettings {
        rel_tol: 1e-11,
        abs_tol: 1e-14,
        max_subdivisions: 4000,
        ..QuadratureSettings::default()
    };
    let density = |m: &FadingModel, y: f64| m.pdf(y).ok().and_then(Density::value).unwrap_or(0.0);
    // f(x) = ∫ f_a(x e^{-t}) f_b(e^t) dt
    let r = integrate_finite(
        |t: f64| density(a, x * (-t).exp()) * density(b, t.exp()),
        -40.0,
        40.0,
        &settings,
    )?;
    Ok(r.value)
}

fn rician_nodes(k: f64, n: usize) -> Result<Vec<(f64, f64)>, FadingError> {
    // E[f] = ∫ f(x) (K+1) e^{-K} I₀(2√(xK(K+1))) e^{-x(K+1)} dx; with
    // y = x(K+1) this is a Laguerre integral of f(y/(K+1)) e^{-K} I₀(2√(yK)).
    let k1 = k + 1.0;
    let rule = gauss_laguerre(n, 1.0)?;
    let mut nodes: Vec<(f64, f64)> = rule
        .iter()
        .map(|(y, w)| {
            let z = 2.0 * (y * k).sqrt();
            (y / k1, w * (z - k).exp() * bessel_i0_scaled(z))
        })
        .collect();
    let total: f64 = nodes.iter().map(|p| p.1).sum();
    for p in nodes.iter_mut() {
        p.1 /= total;
    }
    Ok(nodes)
}

fn lognormal_nodes(sigma_db: f64, n: usize) -> Result<Vec<(f64, f64)>, FadingError> {
    let sigma = lognormal_sigma(sigma_db);
    let rule = gauss_hermite(n)?;
    let norm = PI.sqrt();
    Ok(rule
        .iter()
        .map(|(z, w)| ((sigma * SQRT_2 * z).exp(), w / norm))
        .collect())
}
