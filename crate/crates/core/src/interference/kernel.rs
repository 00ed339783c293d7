//! Tabulated normalised β function.
//!
//! With `u = P₀ ω R₀^{-α}` the integral
//! `β(ω) = ∫_{R₀}^∞ [1 - φ_P(ω r^{-α})] r dr` factors as `R₀² β₁(u)` where
//! `β₁` only depends on the gain distribution and α. Substituting
//! `y = u t^{-α/2}` gives
//!
//! `β₁(u) = u^a M(u) / α`, `M(u) = ∫_0^u [1 - φ(y)] y^{-a-1} dy`, `a = 2/α`.
//!
//! `M` is accumulated once on a panel grid. For gains whose CF decays the
//! panels are geometric and the integrand `[1 - φ(e^s)] e^{-a s}` is stored
//! as a Legendre expansion in `s = ln y`, so an evaluation never calls the
//! CF again. The deterministic gain keeps unit-width panels above 1 and
//! integrates partial panels directly.

use std::sync::Arc;

use num_complex::Complex64;

use super::InterferenceError;
use crate::fading::FadingModel;
use crate::numerics::gauss_legendre;

const SERIES_START: f64 = 1e-8;
const GEOMETRIC_RATIO: f64 = 1.2;
/// End of the table for gains with a decaying characteristic function.
const SMOOTH_END: f64 = 1e16;
/// End of the unit-width panels used for the non-decaying deterministic CF.
const OSCILLATORY_END: f64 = 4096.0;
const PANEL_NODES: usize = 12;

#[derive(Debug)]
struct Table {
    model: FadingModel,
    a: f64,
    mean: f64,
    second: f64,
    ln_ratio: f64,
    geometric_panels: usize,
    /// Unit-width panels after the geometric ones (only for the
    /// deterministic gain, whose CF never decays).
    linear_panels: usize,
    end: f64,
    /// Panel boundaries.
    bounds: Vec<f64>,
    /// `M` at every panel boundary.
    prefix: Vec<Complex64>,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
    /// Legendre coefficients of the log-domain integrand on each geometric
    /// panel; empty for the deterministic gain.
    coefficients: Vec<[Complex64; PANEL_NODES]>,
    c_inf: Complex64,
}

impl Table {
    fn new(model: FadingModel, alpha: f64) -> Result<Self, InterferenceError> {
        let a = 2.0 / alpha;
        let oscillatory = matches!(model, FadingModel::Deterministic);
        let geo_end = if oscillatory { 1.0 } else { SMOOTH_END };
        let geometric_panels = ((geo_end / SERIES_START).ln() / GEOMETRIC_RATIO.ln()).ceil() as usize;
        let ln_ratio = (geo_end / SERIES_START).ln() / geometric_panels as f64;
        let linear_panels = if oscillatory {
            (OSCILLATORY_END - 1.0) as usize
        } else {
            0
        };
        let end = if oscillatory { OSCILLATORY_END } else { geo_end };
        let rule = gauss_legendre(PANEL_NODES)?;
        let mut table = Table {
            mean: model.mean(),
            second: model.second_moment(),
            model,
            a,
            ln_ratio,
            geometric_panels,
            linear_panels,
            end,
            bounds: Vec::new(),
            prefix: Vec::with_capacity(geometric_panels + linear_panels + 1),
            gl_nodes: rule.nodes,
            gl_weights: rule.weights,
            coefficients: Vec::new(),
            c_inf: Complex64::new(0.0, 0.0),
        };
        table.bounds = (0..=geometric_panels + linear_panels).map(|i| table.boundary(i)).collect();
        let mut acc = table.series(SERIES_START);
        table.prefix.push(acc);
        if oscillatory {
            for i in 0..geometric_panels + linear_panels {
                acc += table.panel_integral(table.boundary(i), table.boundary(i + 1));
                table.prefix.push(acc);
            }
        } else {
            table.coefficients = (0..geometric_panels).map(|i| table.expand_panel(i)).collect();
            for c in &table.coefficients {
                // ∫_{-1}^{1} P₀ = 2, higher orders integrate to zero
                acc += c[0] * table.ln_ratio;
                table.prefix.push(acc);
            }
        }
        let m_end = acc;
        table.c_inf = m_end + end.powf(-a) / a - table.far_oscillation(end);
        Ok(table)
    }

    fn boundary(&self, i: usize) -> f64 {
        if i <= self.geometric_panels {
            if i == self.geometric_panels && self.linear_panels > 0 {
                return 1.0;
            }
            (SERIES_START.ln() + i as f64 * self.ln_ratio).exp()
        } else {
            1.0 + (i - self.geometric_panels) as f64
        }
    }

    fn integrand(&self, y: f64) -> Complex64 {
        self.model.one_minus_cf(y) * y.powf(-self.a - 1.0)
    }

    /// Legendre coefficients in `x ∈ [-1, 1]` of `[1 - φ(e^s)] e^{-a s}` on
    /// geometric panel `i`.
    fn expand_panel(&self, i: usize) -> [Complex64; PANEL_NODES] {
        let s_lo = SERIES_START.ln() + i as f64 * self.ln_ratio;
        let half = 0.5 * self.ln_ratio;
        let mut c = [Complex64::new(0.0, 0.0); PANEL_NODES];
        for (&x, &w) in self.gl_nodes.iter().zip(&self.gl_weights) {
            let s = s_lo + half * (x + 1.0);
            let g = self.model.one_minus_cf(s.exp()) * (-self.a * s).exp();
            let p = legendre(x);
            for k in 0..PANEL_NODES {
                c[k] += w * p[k] * g;
            }
        }
        for (k, ck) in c.iter_mut().enumerate() {
            *ck *= 0.5 * (2 * k + 1) as f64;
        }
        c
    }

    /// Position of `ln u` inside geometric panel `i`, mapped to `[-1, 1]`.
    fn local(&self, i: usize, ln_u: f64) -> f64 {
        let s_lo = SERIES_START.ln() + i as f64 * self.ln_ratio;
        (2.0 * (ln_u - s_lo) / self.ln_ratio - 1.0).clamp(-1.0, 1.0)
    }

    fn panel_integral(&self, lo: f64, hi: f64) -> Complex64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut s = Complex64::new(0.0, 0.0);
        for (x, w) in self.gl_nodes.iter().zip(&self.gl_weights) {
            s += *w * self.integrand(mid + half * x);
        }
        s * half
    }

    /// Two leading terms of `M` from `1 - φ(y) ≈ -j y E[h] + y² E[h²]/2`.
    fn series(&self, u: f64) -> Complex64 {
        let a = self.a;
        Complex64::new(
            self.second * u.powf(2.0 - a) / (2.0 * (2.0 - a)),
            -self.mean * u.powf(1.0 - a) / (1.0 - a),
        )
    }

    /// `∫_v^∞ φ(y) y^{-a-1} dy` for `v` past the table end. Only the
    /// deterministic CF is large there; the others decay like `1/y`.
    fn far_oscillation(&self, v: f64) -> Complex64 {
        if self.linear_panels == 0 {
            return Complex64::new(0.0, 0.0);
        }
        // Repeated integration by parts of e^{jy} y^{-a-1}.
        let a = self.a;
        let amp = v.powf(-a - 1.0);
        let d1 = -(a + 1.0) * amp / v;
        let d2 = (a + 1.0) * (a + 2.0) * amp / (v * v);
        let d3 = -(a + 1.0) * (a + 2.0) * (a + 3.0) * amp / (v * v * v);
        let j = Complex64::new(0.0, 1.0);
        Complex64::new(0.0, v).exp() * (j * amp - d1 - j * d2 + d3)
    }

    fn m_with_ln(&self, u: f64, ln_u: f64) -> Complex64 {
        if u <= SERIES_START {
            return self.series(u);
        }
        if u >= self.end {
            let a = self.a;
            let last = *self.prefix.last().expect("table is non-empty");
            return last + (self.end.powf(-a) - u.powf(-a)) / a
                - (self.far_oscillation(self.end) - self.far_oscillation(u));
        }
        let i = self.panel_index(u, ln_u);
        if self.coefficients.is_empty() {
            let lo = self.bounds[i];
            return self.prefix[i] + self.panel_integral(lo, u);
        }
        // ∫_{-1}^{x} P_k = (P_{k+1}(x) - P_{k-1}(x)) / (2k + 1)
        let x = self.local(i, ln_u);
        let p = legendre_extended(x);
        let c = &self.coefficients[i];
        let mut partial = c[0] * (x + 1.0);
        for k in 1..PANEL_NODES {
            partial += c[k] * ((p[k + 1] - p[k - 1]) / (2 * k + 1) as f64);
        }
        self.prefix[i] + partial * (0.5 * self.ln_ratio)
    }

    /// `1 - φ(u)` from the stored expansion where one exists.
    fn one_minus_cf(&self, u: f64, ln_u: f64) -> Complex64 {
        if self.coefficients.is_empty() || u >= self.end {
            return self.model.one_minus_cf(u);
        }
        let i = self.panel_index(u, ln_u);
        let p = legendre(self.local(i, ln_u));
        let g: Complex64 = self.coefficients[i].iter().zip(p.iter()).map(|(c, pk)| c * pk).sum();
        g * (self.a * ln_u).exp()
    }

    fn panel_index(&self, u: f64, ln_u: f64) -> usize {
        let geo_end = self.bounds[self.geometric_panels];
        let i = if u < geo_end {
            (((ln_u - SERIES_START.ln()) / self.ln_ratio).floor() as usize).min(self.geometric_panels - 1)
        } else {
            (self.geometric_panels + (u - 1.0).floor() as usize)
                .min(self.geometric_panels + self.linear_panels - 1)
        };
        // guard against rounding at panel edges
        let mut i = i;
        while i > 0 && self.bounds[i] > u {
            i -= 1;
        }
        while i + 1 < self.bounds.len() - 1 && self.bounds[i + 1] <= u {
            i += 1;
        }
        i
    }

    fn beta1(&self, u: f64, alpha: f64) -> Complex64 {
        if u <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let ln_u = u.ln();
        (self.a * ln_u).exp() * self.m_with_ln(u, ln_u) / alpha
    }

    fn beta1_derivative(&self, u: f64, alpha: f64) -> Complex64 {
        let a = self.a;
        if u <= SERIES_START {
            return Complex64::new(self.second * u / (2.0 - a), -self.mean / (1.0 - a)) / alpha;
        }
        let ln_u = u.ln();
        (a * ((a - 1.0) * ln_u).exp() * self.m_with_ln(u, ln_u) + self.one_minus_cf(u, ln_u) / u) / alpha
    }
}

fn legendre(x: f64) -> [f64; PANEL_NODES] {
    let e = legendre_extended(x);
    let mut p = [0.0; PANEL_NODES];
    p.copy_from_slice(&e[..PANEL_NODES]);
    p
}

/// `P_0(x) ..= P_{PANEL_NODES}(x)`.
fn legendre_extended(x: f64) -> [f64; PANEL_NODES + 1] {
    let mut p = [0.0; PANEL_NODES + 1];
    p[0] = 1.0;
    p[1] = x;
    for k in 1..PANEL_NODES {
        p[k + 1] = ((2 * k + 1) as f64 * x * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
    }
    p
}

/// Normalised β₁ for one interferer gain distribution and path-loss
/// exponent. Cheap to clone.
#[derive(Debug, Clone)]
pub struct BetaKernel {
    alpha: f64,
    mean: f64,
    table: Arc<Table>,
}

impl BetaKernel {
    pub fn new(model: &FadingModel, alpha: f64) -> Result<Self, InterferenceError> {
        if !(alpha.is_finite() && alpha > 2.0) {
            return Err(InterferenceError::Config(format!(
                "path-loss exponent must be > 2, got {alpha}"
            )));
        }
        model.validate()?;
        let model = model.simplified();
        let mean = model.mean();
        let table = Arc::new(Table::new(model, alpha)?);
        Ok(Self { alpha, mean, table })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Mean of the interferer gain.
    pub fn mean_gain(&self) -> f64 {
        self.mean
    }

    /// `β₁(u)`; negative arguments use conjugate symmetry.
    pub fn beta1(&self, u: f64) -> Complex64 {
        if u < 0.0 {
            return self.beta1(-u).conj();
        }
        self.table.beta1(u, self.alpha)
    }

    /// `dβ₁/du` for `u ≥ 0`.
    pub fn beta1_derivative(&self, u: f64) -> Complex64 {
        self.table.beta1_derivative(u, self.alpha)
    }

    /// `C` with `β(ω) = (P₀ ω)^{2/α} C / α` when interferers may come
    /// arbitrarily close (`R₀ = 0`).
    pub fn origin_constant(&self) -> Complex64 {
        self.table.c_inf
    }

    /// Full `β(ω)` for contact distance `r0` and transmit power `p0`.
    pub fn beta(&self, r0: f64, p0: f64, omega: f64) -> Complex64 {
        if omega == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if omega < 0.0 {
            return self.beta(r0, p0, -omega).conj();
        }
        if r0 == 0.0 {
            return (p0 * omega).powf(2.0 / self.alpha) * self.origin_constant() / self.alpha;
        }
        r0 * r0 * self.beta1(p0 * omega * r0.powf(-self.alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate_finite, QuadratureSettings};

    fn direct_beta1(model: &FadingModel, alpha: f64, u: f64) -> Complex64 {
        // ½ ∫_1^∞ [1 - φ(u t^{-α/2})] dt on geometric segments plus the
        // first-order tail
        let s = QuadratureSettings {
            rel_tol: 1e-12,
            abs_tol: 1e-15,
            max_subdivisions: 5000,
            ..QuadratureSettings::default()
        };
        let top = (u / 1e-7).powf(2.0 / alpha).max(1.0);
        let mut sum = Complex64::new(0.0, 0.0);
        let mut lo = 1.0;
        while lo < top {
            let hi = (lo * 2.0).min(top);
            sum += integrate_finite(|t: f64| model.one_minus_cf(u * t.powf(-alpha / 2.0)), lo, hi, &s)
                .unwrap()
                .value;
            lo = hi;
        }
        let tail = Complex64::new(
            u * u * model.second_moment() * top.powf(1.0 - alpha) / (2.0 * (alpha - 1.0)),
            -2.0 * u * model.mean() * top.powf(1.0 - alpha / 2.0) / (alpha - 2.0),
        );
        0.5 * (sum + tail)
    }

    #[test]
    fn table_matches_direct_integration() {
        for model in [FadingModel::Deterministic, FadingModel::Rayleigh, FadingModel::rician_db(10.0)] {
            for alpha in [2.5, 4.0, 5.0] {
                let k = BetaKernel::new(&model, alpha).unwrap();
                for &u in &[1e-10, 1e-6, 0.03, 0.7, 1.0, 3.3, 40.0, 900.0, 5000.0, 1e5] {
                    // the direct oracle cannot follow ~10⁴ oscillations
                    if u > 1e4 && model == FadingModel::Deterministic {
                        continue;
                    }
                    let d = direct_beta1(&model, alpha, u);
                    let t = k.beta1(u);
                    assert!(
                        (t - d).norm() <= 1e-8 * d.norm(),
                        "{} α={alpha} u={u}: {t} vs {d}",
                        model.label()
                    );
                }
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for model in [FadingModel::Deterministic, FadingModel::Rayleigh, FadingModel::rician_db(10.0)] {
            let k = BetaKernel::new(&model, 4.0).unwrap();
            for &u in &[1e-9f64, 1e-3, 0.5, 7.0, 1e3, 1e5] {
                let h = 1e-4 * u.min(1.0);
                let fd = (k.beta1(u + h) - k.beta1(u - h)) / (2.0 * h);
                let d = k.beta1_derivative(u);
                assert!((fd - d).norm() <= 1e-6 * d.norm(), "{} u={u}: {d} vs {fd}", model.label());
            }
        }
    }

    #[test]
    fn small_argument_limit() {
        let k = BetaKernel::new(&FadingModel::Rayleigh, 4.0).unwrap();
        let u = 1e-6;
        // −j u E/(α−2) + u² E[h²] / (2(α−1)) with E[h²] = 2
        let expected = Complex64::new(u * u / 6.0, -u / 2.0);
        assert!((k.beta1(u) - expected).norm() < 1e-9 * u);
    }

    #[test]
    fn real_part_non_negative() {
        for model in [
            FadingModel::Deterministic,
            FadingModel::Rayleigh,
            FadingModel::Rician { k_factor: 3.0 },
            FadingModel::product(FadingModel::Rayleigh, FadingModel::LognormalShadow { sigma_db: 6.0 }),
        ] {
            let k = BetaKernel::new(&model, 3.0).unwrap();
            for i in -40..40 {
                let u = 10f64.powf(i as f64 / 4.0);
                assert!(k.beta1(u).re >= 0.0, "{} u={u}", model.label());
            }
        }
    }

    #[test]
    fn origin_constant_is_large_argument_limit() {
        for model in [FadingModel::Deterministic, FadingModel::Rayleigh] {
            let k = BetaKernel::new(&model, 4.0).unwrap();
            let u = 1e14;
            let ratio = k.beta1(u) * 4.0 / (u.sqrt() * k.origin_constant());
            assert!((ratio - 1.0).norm() < 1e-6, "{}: {ratio}", model.label());
        }
    }

    #[test]
    fn product_matches_nested_direct_integration() {
        let model = FadingModel::product(FadingModel::Rayleigh, FadingModel::LognormalShadow { sigma_db: 4.0 });
        let k = BetaKernel::new(&model, 4.0).unwrap();
        let nodes = FadingModel::LognormalShadow { sigma_db: 4.0 }.expectation_nodes(64).unwrap();
        for &u in &[0.1, 2.0, 50.0] {
            let oracle: Complex64 = nodes
                .iter()
                .map(|&(g, w)| w * direct_beta1(&FadingModel::Rayleigh, 4.0, u * g))
                .sum();
            assert!((k.beta1(u) - oracle).norm() < 1e-8 * oracle.norm());
        }
    }

    #[test]
    fn lognormal_table_matches_direct_integration() {
        let model = FadingModel::LognormalShadow { sigma_db: 6.0 };
        let k = BetaKernel::new(&model, 3.0).unwrap();
        for &u in &[1e-5, 0.15, 4.0, 300.0] {
            let d = direct_beta1(&model, 3.0, u);
            assert!((k.beta1(u) - d).norm() <= 1e-8 * d.norm(), "u={u}: {} vs {d}", k.beta1(u));
        }
    }

    #[test]
    fn rejects_small_exponent() {
        assert!(BetaKernel::new(&FadingModel::Rayleigh, 2.0).is_err());
    }
}
