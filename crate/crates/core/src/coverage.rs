//! Coverage probability of the typical user.
//!
//! `p_c(T) = E_{h₀g₀}[∫ F_I(P₀h₀g₀/(T r^α) - W | r) f_{R₀}(r) dr]` with
//! `f_{R₀}(r) = 2λπr e^{-λπr²}`. The substitution `s = λπr²` turns the
//! contact density into the Gauss–Laguerre weight `e^{-s}`; the serving
//! gain expectation uses the fading model's expectation nodes.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fading::{FadingError, FadingModel};
use crate::interference::{CdfValue, InterferenceError, InterferenceField, NetworkConfig, Noise};
use crate::numerics::{gauss_laguerre, gauss_legendre, NumericsError, QuadratureSettings};

/// Quadrature weights below this are dropped.
const WEIGHT_FLOOR: f64 = 1e-16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverageError {
    #[error("threshold must be finite and > 0, got {0}")]
    InvalidThreshold(f64),
    #[error("thresholds must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("reuse factor must be >= 1, got {0}")]
    InvalidReuse(u32),
    #[error("invalid coverage options: {0}")]
    Options(String),
    #[error(transparent)]
    Interference(#[from] InterferenceError),
    #[error(transparent)]
    Fading(#[from] FadingError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Serving-link gain `h₀g₀` and the gain of every interfering link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub serving: FadingModel,
    pub interferers: FadingModel,
}

impl ChannelSpec {
    pub fn new(serving: FadingModel, interferers: FadingModel) -> Self {
        Self { serving, interferers }
    }

    /// Path loss only on every link.
    pub fn pathloss() -> Self {
        Self::new(FadingModel::Deterministic, FadingModel::Deterministic)
    }

    pub fn rayleigh() -> Self {
        Self::new(FadingModel::Rayleigh, FadingModel::Rayleigh)
    }

    /// Rician serving link with Rayleigh interferers.
    pub fn rician(k_factor: f64) -> Self {
        Self::new(FadingModel::Rician { k_factor }, FadingModel::Rayleigh)
    }

    pub fn validate(&self) -> Result<(), FadingError> {
        self.serving.validate()?;
        self.interferers.validate()
    }

    pub fn label(&self) -> String {
        format!("{}/{}", self.serving.label(), self.interferers.label())
    }
}

/// Distance from the typical user to its nearest base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactDistanceDist {
    pub lambda: f64,
}

impl ContactDistanceDist {
    pub fn new(lambda: f64) -> Self {
        Self { lambda }
    }

    pub fn pdf(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        2.0 * self.lambda * PI * r * (-self.lambda * PI * r * r).exp()
    }

    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        -(-self.lambda * PI * r * r).exp_m1()
    }

    pub fn mean(&self) -> f64 {
        0.5 / self.lambda.sqrt()
    }

    /// Radius with `λπr² = s`.
    pub fn radius_at(&self, s: f64) -> f64 {
        (s / (self.lambda * PI)).sqrt()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.radius_at(-(-u).ln_1p())
    }
}

/// Quadrature over `s = λπr²` against the weight `e^{-s}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialRule {
    /// Gauss–Laguerre with `r_nodes` nodes.
    Laguerre,
    /// Gauss–Legendre panels of ratio 4 in `ln s` from `1e-7` to `40`,
    /// `r_nodes / 6` nodes per panel (at least 4). Resolves the
    /// high-threshold coverage tail, which comes from users very close to
    /// their base station.
    Geometric,
}

const GEOMETRIC_S_LO: f64 = 1e-7;
const GEOMETRIC_S_HI: f64 = 40.0;

impl RadialRule {
    fn nodes(&self, n: usize) -> Result<Vec<(f64, f64)>, NumericsError> {
        match self {
            RadialRule::Laguerre => Ok(gauss_laguerre(n, 1.0)?.iter().collect()),
            RadialRule::Geometric => {
                let per_panel = (n / 6).max(4);
                let rule = gauss_legendre(per_panel)?;
                let panels = ((GEOMETRIC_S_HI / GEOMETRIC_S_LO).ln() / 4f64.ln()).ceil() as usize;
                let width = (GEOMETRIC_S_HI / GEOMETRIC_S_LO).ln() / panels as f64;
                // [0, s_lo] carries e^{-s} ≈ 1 and a coverage of ≈ 1
                let mut out = vec![(0.5 * GEOMETRIC_S_LO, GEOMETRIC_S_LO)];
                for p in 0..panels {
                    let mid = GEOMETRIC_S_LO.ln() + width * (p as f64 + 0.5);
                    for (x, w) in rule.iter() {
                        let s = (mid + 0.5 * width * x).exp();
                        out.push((s, 0.5 * width * w * s * (-s).exp()));
                    }
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageOptions {
    /// Node count of the radial rule over `s = λπr²`.
    pub r_nodes: usize,
    pub radial: RadialRule,
    /// Expectation nodes of the serving gain.
    pub gain_nodes: usize,
    /// Re-evaluate with doubled node counts and flag points that move by
    /// more than `convergence_tol`.
    pub check_convergence: bool,
    pub convergence_tol: f64,
    pub quadrature: QuadratureSettings,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        Self {
            r_nodes: 48,
            radial: RadialRule::Laguerre,
            gain_nodes: 64,
            check_convergence: false,
            convergence_tol: 1e-4,
            quadrature: QuadratureSettings::default(),
        }
    }
}

impl CoverageOptions {
    pub fn validate(&self) -> Result<(), CoverageError> {
        if self.r_nodes == 0 || self.gain_nodes == 0 {
            return Err(CoverageError::Options("node counts must be >= 1".into()));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(CoverageError::Options("convergence_tol must be > 0".into()));
        }
        self.quadrature.validate()?;
        Ok(())
    }

    fn doubled(&self) -> Self {
        Self {
            r_nodes: self.r_nodes * 2,
            gain_nodes: self.gain_nodes * 2,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    /// Some interference-CDF evaluations failed or did not converge; they
    /// are counted in `failed_nodes`.
    Partial,
    /// Doubling the node counts moved the value by more than the tolerance.
    Unconverged,
}

impl PointStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::Partial => "partial",
            PointStatus::Unconverged => "unconverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageValue {
    pub probability: f64,
    /// Quadrature nodes whose interference CDF failed or did not converge.
    pub failed_nodes: usize,
    /// Change under node doubling, when checked.
    pub refinement_change: Option<f64>,
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    pub config: NetworkConfig,
    pub channel: ChannelSpec,
    /// SHA-256 of the JSON encoding of `config` and `channel`.
    pub fingerprint: String,
}

impl CurveMetadata {
    pub fn new(config: NetworkConfig, channel: ChannelSpec) -> Self {
        let json = serde_json::to_vec(&(&config, &channel)).expect("plain data serializes");
        let digest = Sha256::digest(&json);
        let fingerprint = digest.iter().map(|b| format!("{b:02x}")).collect();
        Self {
            config,
            channel,
            fingerprint,
        }
    }
}

/// Coverage probability over a threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfCurve {
    /// Linear SINR thresholds, strictly increasing.
    pub thresholds: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub points: Vec<CoverageValue>,
    pub metadata: CurveMetadata,
}

impl CcdfCurve {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Largest increase between consecutive points; ≤ 0 for a proper CCDF.
    pub fn max_increase(&self) -> f64 {
        self.probabilities
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn validate_thresholds(thresholds: &[f64]) -> Result<(), CoverageError> {
    for (i, &t) in thresholds.iter().enumerate() {
        if !(t.is_finite() && t > 0.0) {
            return Err(CoverageError::InvalidThreshold(t));
        }
        if i > 0 && t <= thresholds[i - 1] {
            return Err(CoverageError::NotIncreasing(i));
        }
    }
    Ok(())
}

/// Quadrature over contact distance and serving gain, sharing one
/// interference kernel.
pub(crate) struct Engine {
    pub field: InterferenceField,
    /// `(s, weight)` Laguerre nodes.
    pub s_nodes: Vec<(f64, f64)>,
    /// `(g, weight)` serving-gain nodes.
    pub gain_nodes: Vec<(f64, f64)>,
}

impl Engine {
    pub fn new(cfg: &NetworkConfig, spec: &ChannelSpec, opts: &CoverageOptions) -> Result<Self, CoverageError> {
        cfg.validate()?;
        spec.validate()?;
        opts.validate()?;
        let field = InterferenceField::new(*cfg, &spec.interferers, opts.quadrature)?;
        let s_nodes = opts
            .radial
            .nodes(opts.r_nodes)?
            .into_iter()
            .filter(|&(_, w)| w > WEIGHT_FLOOR)
            .collect();
        let gain_nodes = spec
            .serving
            .simplified()
            .expectation_nodes(opts.gain_nodes)?
            .into_iter()
            .filter(|&(_, w)| w > WEIGHT_FLOOR)
            .collect();
        Ok(Self {
            field,
            s_nodes,
            gain_nodes,
        })
    }

    /// `κ = 2π (λ/Δ) r²` at Laguerre node `s`.
    pub fn kappa(&self, s: f64) -> f64 {
        2.0 * s / self.field.config().delta as f64
    }

    pub fn radius(&self, s: f64) -> f64 {
        ContactDistanceDist::new(self.field.config().lambda).radius_at(s)
    }

    /// Normalised interference argument `ξ = x R₀^α / P₀` for a serving
    /// gain `g`, threshold `t` and contact node `s`, where
    /// `x = P₀ g / (t r^α) - W`. `None` when noise alone already fails.
    pub fn xi(&self, s: f64, g: f64, t: f64) -> Option<f64> {
        let c = self.field.config();
        let signal = g / t;
        let xi = match c.noise {
            Noise::InterferenceLimited => signal,
            Noise::Thermal { watts } => signal - watts * self.radius(s).powf(c.alpha) / c.p0,
        };
        (xi > 0.0).then_some(xi)
    }

    pub fn cdf(&self, s: f64, xi: f64) -> Result<CdfValue, InterferenceError> {
        self.field.normalized_cdf(self.kappa(s), xi)
    }

    /// Coverage at every threshold. Interference CDFs are evaluated once
    /// per distinct `(s-node, ξ)` in parallel and summed in a fixed order.
    pub fn coverage(&self, thresholds: &[f64]) -> Vec<CoverageValue> {
        let mut keys: Vec<(usize, u64)> = Vec::new();
        let mut index: HashMap<(usize, u64), usize> = HashMap::new();
        for &t in thresholds {
            for (i, &(s, _)) in self.s_nodes.iter().enumerate() {
                for &(g, _) in &self.gain_nodes {
                    if let Some(xi) = self.xi(s, g, t) {
                        let key = (i, xi.to_bits());
                        index.entry(key).or_insert_with(|| {
                            keys.push(key);
                            keys.len() - 1
                        });
                    }
                }
            }
        }
        let values: Vec<Result<CdfValue, InterferenceError>> = keys
            .par_iter()
            .map(|&(i, bits)| self.cdf(self.s_nodes[i].0, f64::from_bits(bits)))
            .collect();

        thresholds
            .iter()
            .map(|&t| {
                let mut total = 0.0;
                let mut failed = 0;
                for (i, &(s, ws)) in self.s_nodes.iter().enumerate() {
                    for &(g, wg) in &self.gain_nodes {
                        let Some(xi) = self.xi(s, g, t) else { continue };
                        match &values[index[&(i, xi.to_bits())]] {
                            Ok(v) => {
                                if !v.converged {
                                    failed += 1;
                                }
                                total += ws * wg * v.value;
                            }
                            Err(e) => {
                                log::warn!("interference CDF failed at s={s}, xi={xi}: {e}");
                                failed += 1;
                            }
                        }
                    }
                }
                CoverageValue {
                    probability: total.clamp(0.0, 1.0),
                    failed_nodes: failed,
                    refinement_change: None,
                    status: if failed == 0 { PointStatus::Ok } else { PointStatus::Partial },
                }
            })
            .collect()
    }
}

fn evaluate(
    cfg: &NetworkConfig,
    spec: &ChannelSpec,
    thresholds: &[f64],
    opts: &CoverageOptions,
) -> Result<Vec<CoverageValue>, CoverageError> {
    validate_thresholds(thresholds)?;
    let coarse = Engine::new(cfg, spec, opts)?.coverage(thresholds);
    if !opts.check_convergence {
        return Ok(coarse);
    }
    let fine = Engine::new(cfg, spec, &opts.doubled())?.coverage(thresholds);
    Ok(coarse
        .iter()
        .zip(fine)
        .map(|(c, mut f)| {
            let change = (f.probability - c.probability).abs();
            f.refinement_change = Some(change);
            if change >= opts.convergence_tol && f.status == PointStatus::Ok {
                f.status = PointStatus::Unconverged;
            }
            f
        })
        .collect())
}

/// `P[SINR ≥ T | h₀g₀, R₀ = r0] = F_I(P₀h₀g₀/(T r0^α) - W | r0)`.
pub fn link_success(
    cfg: &NetworkConfig,
    spec: &ChannelSpec,
    t: f64,
    h0g0: f64,
    r0: f64,
    settings: &QuadratureSettings,
) -> Result<f64, CoverageError> {
    if !(t.is_finite() && t > 0.0) {
        return Err(CoverageError::InvalidThreshold(t));
    }
    if !(h0g0.is_finite() && h0g0 >= 0.0) {
        return Err(FadingError::NegativeGain(h0g0).into());
    }
    if !(r0.is_finite() && r0 > 0.0) {
        return Err(CoverageError::Options(format!("contact distance must be > 0, got {r0}")));
    }
    let x = cfg.p0 * h0g0 / (t * r0.powf(cfg.alpha)) - cfg.noise_w();
    if h0g0 == 0.0 || x <= 0.0 {
        return Ok(0.0);
    }
    let field = InterferenceField::new(*cfg, &spec.interferers, *settings)?;
    let v = field.cdf(r0, x)?;
    if !v.converged {
        return Err(InterferenceError::NonConvergence {
            what: "interference CDF inversion",
            partial: v.value,
        }
        .into());
    }
    Ok(v.value)
}

pub fn coverage_probability(
    cfg: &NetworkConfig,
    spec: &ChannelSpec,
    t: f64,
    opts: &CoverageOptions,
) -> Result<CoverageValue, CoverageError> {
    Ok(evaluate(cfg, spec, &[t], opts)?[0])
}

pub fn coverage_curve(
    cfg: &NetworkConfig,
    spec: &ChannelSpec,
    thresholds: &[f64],
    opts: &CoverageOptions,
) -> Result<CcdfCurve, CoverageError> {
    let points = evaluate(cfg, spec, thresholds, opts)?;
    Ok(CcdfCurve {
        thresholds: thresholds.to_vec(),
        probabilities: points.iter().map(|p| p.probability).collect(),
        points,
        metadata: CurveMetadata::new(*cfg, spec.clone()),
    })
}

/// Coverage at threshold `t` for each reuse factor, with co-channel
/// interferers thinned to `λ/Δ`.
pub fn coverage_vs_reuse(
    cfg: &NetworkConfig,
    spec: &ChannelSpec,
    t: f64,
    deltas: &[u32],
    opts: &CoverageOptions,
) -> Result<Vec<CoverageValue>, CoverageError> {
    deltas
        .iter()
        .map(|&d| {
            if d < 1 {
                return Err(CoverageError::InvalidReuse(d));
            }
            coverage_probability(&cfg.with_delta(d), spec, t, opts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::db_to_linear;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp1, Poisson};

    fn base() -> NetworkConfig {
        NetworkConfig::interference_limited(1.0, 1.0, 4.0)
    }

    /// Rayleigh/Rayleigh, α = 4, interference-limited.
    fn rayleigh_oracle(t: f64) -> f64 {
        let r = t.sqrt();
        1.0 / (1.0 + r * (PI / 2.0 - (1.0 / r).atan()))
    }

    fn db_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| db_to_linear(lo + step * i as f64)).collect()
    }

    #[test]
    fn contact_distance_density_integrates_to_one() {
        let d = ContactDistanceDist::new(0.3);
        let s = QuadratureSettings::default();
        let total = crate::numerics::integrate_finite(|r| d.pdf(r), 0.0, 20.0, &s).unwrap().value;
        assert!((total - 1.0).abs() < 1e-9);
        assert!((d.cdf(1.3) - crate::numerics::integrate_finite(|r| d.pdf(r), 0.0, 1.3, &s).unwrap().value).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let mean = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - d.mean()).abs() < 5e-3);
    }

    #[test]
    fn rayleigh_matches_closed_form_at_zero_db() {
        let v = coverage_probability(&base(), &ChannelSpec::rayleigh(), 1.0, &CoverageOptions::default()).unwrap();
        assert_eq!(v.status, PointStatus::Ok);
        assert!((v.probability - 0.5602).abs() < 0.002, "{}", v.probability);
    }

    #[test]
    fn rayleigh_curve_matches_closed_form() {
        let grid = db_grid(-10.0, 20.0, 2.5);
        let curve = coverage_curve(&base(), &ChannelSpec::rayleigh(), &grid, &CoverageOptions::default()).unwrap();
        for (t, p) in grid.iter().zip(&curve.probabilities) {
            assert!((p - rayleigh_oracle(*t)).abs() < 0.005, "T {t}: {p} vs {}", rayleigh_oracle(*t));
        }
        assert!(curve.max_increase() <= 1e-4);
    }

    #[test]
    fn geometric_rule_resolves_high_thresholds() {
        let o = CoverageOptions {
            radial: RadialRule::Geometric,
            ..CoverageOptions::default()
        };
        let nodes = o.radial.nodes(o.r_nodes).unwrap();
        let mass: f64 = nodes.iter().map(|p| p.1).sum();
        assert!((mass - 1.0).abs() < 1e-10, "{mass}");
        let grid = db_grid(-10.0, 50.0, 10.0);
        let c = coverage_curve(&base(), &ChannelSpec::rayleigh(), &grid, &o).unwrap();
        for (t, p) in grid.iter().zip(&c.probabilities) {
            let want = rayleigh_oracle(*t);
            assert!((p - want).abs() < 2e-3 * want.max(0.05), "T {t}: {p} vs {want}");
        }
    }

    #[test]
    fn small_threshold_gives_full_coverage() {
        for spec in [ChannelSpec::pathloss(), ChannelSpec::rayleigh(), ChannelSpec::rician(10.0)] {
            let v = coverage_probability(&base(), &spec, 1e-9, &CoverageOptions::default()).unwrap();
            assert!(v.probability >= 0.999, "{}: {}", spec.label(), v.probability);
        }
    }

    #[test]
    fn singleton_curve_equals_probability() {
        let o = CoverageOptions::default();
        let spec = ChannelSpec::rician(10.0);
        let c = coverage_curve(&base(), &spec, &[2.0], &o).unwrap();
        assert_eq!(c.probabilities[0], coverage_probability(&base(), &spec, 2.0, &o).unwrap().probability);
    }

    #[test]
    fn higher_exponent_gives_better_coverage() {
        let grid = db_grid(-10.0, 20.0, 5.0);
        let o = CoverageOptions::default();
        let curves: Vec<Vec<f64>> = [2.2, 2.5, 3.0, 4.0, 5.0]
            .iter()
            .map(|&a| {
                coverage_curve(&NetworkConfig::interference_limited(1.0, 1.0, a), &ChannelSpec::pathloss(), &grid, &o)
                    .unwrap()
                    .probabilities
            })
            .collect();
        for w in curves.windows(2) {
            for (lo, hi) in w[0].iter().zip(&w[1]) {
                assert!(hi >= &(lo - 1e-9), "{lo} > {hi}");
            }
        }
    }

    #[test]
    fn reuse_improves_coverage() {
        let o = CoverageOptions::default();
        let spec = ChannelSpec::rayleigh();
        let t = db_to_linear(10.0);
        let v = coverage_vs_reuse(&base(), &spec, t, &[1, 2, 3, 4, 6, 8], &o).unwrap();
        assert_eq!(v[0], coverage_probability(&base(), &spec, t, &o).unwrap());
        for w in v.windows(2) {
            assert!(w[1].probability >= w[0].probability);
        }
        assert!(coverage_vs_reuse(&base(), &spec, t, &[0], &o).is_err());
    }

    #[test]
    fn serving_fading_ordering_at_low_threshold() {
        let grid = db_grid(-10.0, 0.0, 2.5);
        let o = CoverageOptions::default();
        let det = coverage_curve(&base(), &ChannelSpec::new(FadingModel::Deterministic, FadingModel::Rayleigh), &grid, &o).unwrap();
        let ric = coverage_curve(&base(), &ChannelSpec::rician(10.0), &grid, &o).unwrap();
        let ray = coverage_curve(&base(), &ChannelSpec::rayleigh(), &grid, &o).unwrap();
        for i in 0..grid.len() {
            assert!(det.probabilities[i] >= ric.probabilities[i] - 1e-9);
            assert!(ric.probabilities[i] >= ray.probabilities[i] - 1e-9);
        }
    }

    #[test]
    fn rician_without_line_of_sight_is_rayleigh() {
        let grid = db_grid(-10.0, 20.0, 5.0);
        let o = CoverageOptions::default();
        let ric = coverage_curve(&base(), &ChannelSpec::rician(0.0), &grid, &o).unwrap();
        let ray = coverage_curve(&base(), &ChannelSpec::rayleigh(), &grid, &o).unwrap();
        for (a, b) in ric.probabilities.iter().zip(&ray.probabilities) {
            assert!((a - b).abs() < 0.002);
        }
    }

    #[test]
    fn density_does_not_matter_without_noise() {
        let o = CoverageOptions::default();
        for spec in [ChannelSpec::pathloss(), ChannelSpec::rayleigh(), ChannelSpec::rician(10.0)] {
            for t in [1.0, 10.0] {
                let lo = coverage_probability(&NetworkConfig::interference_limited(0.1, 1.0, 4.0), &spec, t, &o).unwrap();
                let hi = coverage_probability(&NetworkConfig::interference_limited(10.0, 1.0, 4.0), &spec, t, &o).unwrap();
                assert!((lo.probability - hi.probability).abs() < 0.01);
            }
        }
    }

    #[test]
    fn noise_lowers_coverage() {
        let o = CoverageOptions::default();
        let spec = ChannelSpec::rayleigh();
        let clean = coverage_probability(&base(), &spec, 1.0, &o).unwrap().probability;
        let noisy = coverage_probability(&base().with_noise(0.1), &spec, 1.0, &o).unwrap().probability;
        assert!(noisy < clean);
        // zero thermal noise is numerically the interference-limited case
        let zero = coverage_probability(&base().with_noise(0.0), &spec, 1.0, &o).unwrap().probability;
        assert!((zero - clean).abs() < 1e-12);
    }

    #[test]
    fn convergence_check_reports_change() {
        let o = CoverageOptions {
            check_convergence: true,
            ..CoverageOptions::default()
        };
        let exact = rayleigh_oracle(1.0);
        let v = coverage_probability(&base(), &ChannelSpec::rayleigh(), 1.0, &o).unwrap();
        let change = v.refinement_change.unwrap();
        assert!(change < 5e-4, "{change}");
        let expected = if change < 1e-4 { PointStatus::Ok } else { PointStatus::Unconverged };
        assert_eq!(v.status, expected);
        // the refined value is the one returned
        assert!((v.probability - exact).abs() < 1e-4, "{}", v.probability - exact);
        let loose = CoverageOptions { convergence_tol: 1.0, ..o };
        let w = coverage_probability(&base(), &ChannelSpec::rayleigh(), 1.0, &loose).unwrap();
        assert_eq!(w.status, PointStatus::Ok);
    }

    #[test]
    fn link_success_limits() {
        let s = QuadratureSettings::default();
        let spec = ChannelSpec::rayleigh();
        assert_eq!(link_success(&base(), &spec, 1.0, 0.0, 1.0, &s).unwrap(), 0.0);
        assert_eq!(link_success(&base().with_noise(10.0), &spec, 1.0, 1.0, 1.0, &s).unwrap(), 0.0);
        assert!(link_success(&base(), &spec, 0.0, 1.0, 1.0, &s).is_err());
    }

    #[test]
    fn link_success_matches_simulated_interference() {
        // BSs in [1, 10] plus the mean of the field beyond; success when
        // I ≤ 1 for h₀g₀ = r0 = T = 1.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r_max: f64 = 10.0;
        let poisson = Poisson::new(PI * (r_max * r_max - 1.0)).unwrap();
        let n = 200_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let k = poisson.sample(&mut rng) as usize;
            let mut i = PI / (r_max * r_max);
            for _ in 0..k {
                let t = 1.0 + rng.random::<f64>() * (r_max * r_max - 1.0);
                let h: f64 = Exp1.sample(&mut rng);
                i += h / (t * t);
            }
            if i <= 1.0 {
                hits += 1;
            }
        }
        let empirical = hits as f64 / n as f64;
        let p = link_success(&base(), &ChannelSpec::rayleigh(), 1.0, 1.0, 1.0, &QuadratureSettings::default()).unwrap();
        assert!((p - empirical).abs() < 0.005, "{p} vs {empirical}");
    }

    #[test]
    fn rejects_bad_thresholds() {
        let o = CoverageOptions::default();
        let spec = ChannelSpec::rayleigh();
        assert!(matches!(coverage_curve(&base(), &spec, &[1.0, 1.0], &o), Err(CoverageError::NotIncreasing(1))));
        assert!(coverage_curve(&base(), &spec, &[-1.0], &o).is_err());
    }

    #[test]
    fn fingerprint_tracks_configuration() {
        let a = CurveMetadata::new(base(), ChannelSpec::rayleigh());
        let b = CurveMetadata::new(base().with_delta(2), ChannelSpec::rayleigh());
        assert_eq!(a.fingerprint.len(), 64);
        assert_ne!(a.fingerprint, b.fingerprint);
        assert_eq!(a, CurveMetadata::new(base(), ChannelSpec::rayleigh()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn power_scaling_is_invisible(scale in 0.001f64..1000.0, t_db in -10.0f64..20.0) {
            let o = CoverageOptions { r_nodes: 24, gain_nodes: 24, ..CoverageOptions::default() };
            let spec = ChannelSpec::rayleigh();
            let t = db_to_linear(t_db);
            let a = coverage_probability(&base(), &spec, t, &o).unwrap().probability;
            let scaled = NetworkConfig { p0: scale, ..base() };
            let b = coverage_probability(&scaled, &spec, t, &o).unwrap().probability;
            prop_assert!((a - b).abs() < 1e-6);
        }

        #[test]
        fn curves_are_non_increasing(k_db in -5.0f64..15.0, alpha in 2.5f64..5.0) {
            let o = CoverageOptions { r_nodes: 24, gain_nodes: 32, ..CoverageOptions::default() };
            let spec = ChannelSpec::new(FadingModel::rician_db(k_db), FadingModel::Rayleigh);
            let grid = db_grid(-10.0, 20.0, 5.0);
            let c = coverage_curve(&NetworkConfig::interference_limited(1.0, 1.0, alpha), &spec, &grid, &o).unwrap();
            prop_assert!(c.max_increase() <= 1e-4);
            prop_assert!(c.probabilities.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
