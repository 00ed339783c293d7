//! Network simulation: Poisson base-station deployments in a disc, users
//! in a smaller concentric observation disc, nearest-BS association and
//! per-link fading draws.
//!
//! Every source of randomness is a ChaCha8 substream keyed by
//! `(seed, run, stream)`: stream 0 deploys the base stations, stream
//! `u + 1` drives user `u` (position, then fading draws in BS order). Runs
//! execute in parallel and are reduced in run order, so estimates are
//! bit-identical for any thread count.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{validate_thresholds, ChannelSpec, CoverageError};
use crate::interference::NetworkConfig;

/// Smallest admissible expected number of deployed base stations.
pub const MIN_EXPECTED_BS: f64 = 200.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid simulation plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Coverage(#[from] CoverageError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub cfg: NetworkConfig,
    pub spec: ChannelSpec,
    /// Radius of the deployment disc.
    pub sim_radius: f64,
    /// Users are placed uniformly inside this radius.
    pub obs_radius: f64,
    pub users_per_run: usize,
    pub runs: usize,
    pub seed: u64,
    /// Linear SINR thresholds, strictly increasing.
    pub thresholds: Vec<f64>,
    /// When false only the serving link is simulated (noise-limited).
    #[serde(default = "enabled")]
    pub interference: bool,
}

fn enabled() -> bool {
    true
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<(), SimulationError> {
        self.cfg.validate().map_err(CoverageError::from)?;
        self.spec.validate().map_err(CoverageError::from)?;
        validate_thresholds(&self.thresholds)?;
        let bad = |m: String| Err(SimulationError::Plan(m));
        if !(self.sim_radius.is_finite() && self.sim_radius > 0.0) {
            return bad(format!("sim_radius must be > 0, got {}", self.sim_radius));
        }
        if !(self.obs_radius > 0.0 && self.obs_radius <= 0.5 * self.sim_radius) {
            return bad(format!(
                "obs_radius must lie in (0, sim_radius/2 = {}], got {}",
                0.5 * self.sim_radius,
                self.obs_radius
            ));
        }
        let expected = self.expected_bs();
        if expected < MIN_EXPECTED_BS {
            return bad(format!(
                "expected base-station count lambda*pi*sim_radius^2 = {expected:.1} is below {MIN_EXPECTED_BS}"
            ));
        }
        if self.users_per_run == 0 {
            return bad("users_per_run must be >= 1".into());
        }
        if self.runs < 2 {
            return bad(format!("at least 2 runs are needed for error bars, got {}", self.runs));
        }
        if self.cfg.noise_w() == 0.0 && !self.interference {
            return bad("a noise-limited simulation needs a positive noise power".into());
        }
        Ok(())
    }

    pub fn expected_bs(&self) -> f64 {
        self.cfg.lambda * PI * self.sim_radius * self.sim_radius
    }
}

/// Base stations of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub positions: Vec<[f64; 2]>,
    /// Channel colour in `1..=Δ` per base station; `None` when Δ = 1.
    pub colors: Option<Vec<u32>>,
}

impl Deployment {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Index and squared distance of the base station closest to `p`.
    pub fn nearest(&self, p: [f64; 2]) -> Option<(usize, f64)> {
        self.positions
            .iter()
            .enumerate()
            .map(|(i, q)| (i, dist2(*q, p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    fn color(&self, i: usize) -> u32 {
        self.colors.as_ref().map_or(1, |c| c[i])
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for `(seed, run, stream)`.
pub fn substream(seed: u64, run: u64, stream: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut state = splitmix64(&mut state) ^ run.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

fn uniform_in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    [r * theta.cos(), r * theta.sin()]
}

/// Poisson deployment for run `run`; an empty draw is redrawn.
pub fn deploy(plan: &SimulationPlan, run: u64) -> Deployment {
    let mut rng = substream(plan.seed, run, 0);
    let poisson = Poisson::new(plan.expected_bs()).expect("validated plan has a positive mean");
    let mut n = 0usize;
    for attempt in 0.. {
        n = poisson.sample(&mut rng) as usize;
        if n > 0 {
            break;
        }
        log::warn!("run {run}: empty deployment, redrawing (attempt {attempt})");
    }
    let positions = (0..n).map(|_| uniform_in_disc(plan.sim_radius, &mut rng)).collect();
    let delta = plan.cfg.delta;
    let colors = (delta > 1).then(|| (0..n).map(|_| rng.random_range(1..=delta)).collect());
    Deployment { positions, colors }
}

/// `d^{-α}` from the squared distance.
fn path_gain(d2: f64, alpha: f64) -> f64 {
    if alpha == 4.0 {
        1.0 / (d2 * d2)
    } else {
        d2.powf(-0.5 * alpha)
    }
}

/// SINR of a user at `user`, served by its nearest base station.
pub fn sample_sinr<R: Rng + ?Sized>(
    bs: &Deployment,
    user: [f64; 2],
    spec: &ChannelSpec,
    cfg: &NetworkConfig,
    interference: bool,
    rng: &mut R,
) -> f64 {
    let (serving, d2) = bs.nearest(user).expect("deployment is non-empty");
    let signal = cfg.p0 * spec.serving.sample(rng) * path_gain(d2, cfg.alpha);
    let mut total = 0.0;
    if interference {
        let color = bs.color(serving);
        for (i, q) in bs.positions.iter().enumerate() {
            if i == serving || bs.color(i) != color {
                continue;
            }
            total += spec.interferers.sample(rng) * path_gain(dist2(*q, user), cfg.alpha);
        }
    }
    signal / (cfg.p0 * total + cfg.noise_w())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub thresholds: Vec<f64>,
    /// Mean over runs of the per-run fraction of links with SINR > T.
    pub probabilities: Vec<f64>,
    /// Standard error of the mean from the between-run variance.
    pub stderr: Vec<f64>,
    pub total_links: usize,
}

/// Exceedance counts of one run.
fn run_once(plan: &SimulationPlan, run: u64) -> Vec<usize> {
    let bs = deploy(plan, run);
    let mut counts = vec![0; plan.thresholds.len()];
    for u in 0..plan.users_per_run {
        let mut rng = substream(plan.seed, run, u as u64 + 1);
        let user = uniform_in_disc(plan.obs_radius, &mut rng);
        let sinr = sample_sinr(&bs, user, &plan.spec, &plan.cfg, plan.interference, &mut rng);
        // thresholds are increasing, so exceedances form a prefix
        let k = plan.thresholds.partition_point(|&t| sinr > t);
        for c in &mut counts[..k] {
            *c += 1;
        }
    }
    counts
}

/// Empirical SINR CCDF over all runs of `plan`.
pub fn run(plan: &SimulationPlan) -> Result<McEstimate, SimulationError> {
    plan.validate()?;
    let per_run: Vec<Vec<usize>> = (0..plan.runs as u64)
        .into_par_iter()
        .map(|r| run_once(plan, r))
        .collect();
    let users = plan.users_per_run as f64;
    let runs = plan.runs as f64;
    let mut probabilities = Vec::with_capacity(plan.thresholds.len());
    let mut stderr = Vec::with_capacity(plan.thresholds.len());
    for j in 0..plan.thresholds.len() {
        let fractions = per_run.iter().map(|c| c[j] as f64 / users);
        let mean = fractions.clone().sum::<f64>() / runs;
        let var = fractions.map(|f| (f - mean) * (f - mean)).sum::<f64>() / (runs - 1.0);
        probabilities.push(mean);
        stderr.push((var / runs).sqrt());
    }
    Ok(McEstimate {
        thresholds: plan.thresholds.clone(),
        probabilities,
        stderr,
        total_links: plan.runs * plan.users_per_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::ContactDistanceDist;
    use crate::fading::{db_to_linear, FadingModel};

    fn plan(spec: ChannelSpec, sim_radius: f64, users: usize, runs: usize) -> SimulationPlan {
        SimulationPlan {
            cfg: NetworkConfig::interference_limited(1.0, 1.0, 4.0),
            spec,
            sim_radius,
            obs_radius: 0.5 * sim_radius,
            users_per_run: users,
            runs,
            seed: 7,
            thresholds: vec![1.0],
            interference: true,
        }
    }

    fn rayleigh_oracle(t: f64) -> f64 {
        let r = t.sqrt();
        1.0 / (1.0 + r * (std::f64::consts::FRAC_PI_2 - (1.0 / r).atan()))
    }

    #[test]
    fn poisson_mean_count() {
        let p = plan(ChannelSpec::rayleigh(), 20.0, 1, 2);
        let runs = 200;
        let mean = (0..runs).map(|r| deploy(&p, r).len() as f64).sum::<f64>() / runs as f64;
        let expected = 400.0 * PI;
        let sigma = (expected / runs as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * sigma, "{mean} vs {expected}");
    }

    #[test]
    fn colouring_thins_evenly() {
        let mut p = plan(ChannelSpec::rayleigh(), 20.0, 1, 2);
        p.cfg.delta = 4;
        let runs = 100;
        let mut per_color = [0usize; 4];
        let mut total = 0;
        for r in 0..runs {
            let d = deploy(&p, r);
            total += d.len();
            for &c in d.colors.as_ref().unwrap() {
                per_color[c as usize - 1] += 1;
            }
        }
        let expected = total as f64 / 4.0;
        // multinomial share of a fixed total
        let sigma = (total as f64 * 0.25 * 0.75).sqrt();
        for c in per_color {
            assert!((c as f64 - expected).abs() < 3.0 * sigma, "{per_color:?}");
        }
        assert!(deploy(&plan(ChannelSpec::rayleigh(), 20.0, 1, 2), 0).colors.is_none());
    }

    #[test]
    fn contact_distance_matches_ppp_law() {
        let p = plan(ChannelSpec::rayleigh(), 8.0, 1, 2);
        let n = 100_000;
        let mut d: Vec<f64> = (0..n).map(|r| deploy(&p, r).nearest([0.0, 0.0]).unwrap().1.sqrt()).collect();
        d.sort_by(f64::total_cmp);
        let law = ContactDistanceDist::new(1.0);
        let ks = d
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = law.cdf(x);
                (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS {ks}");
    }

    #[test]
    fn deterministic_two_station_sinr() {
        let bs = Deployment { positions: vec![[1.0, 0.0], [-2.0, 0.0]], colors: None };
        let cfg = NetworkConfig::interference_limited(1.0, 1.0, 4.0);
        let mut rng = substream(1, 0, 0);
        let sinr = sample_sinr(&bs, [0.0, 0.0], &ChannelSpec::pathloss(), &cfg, true, &mut rng);
        assert!((sinr - 16.0).abs() < 1e-12);
    }

    #[test]
    fn single_station_noise_limited_sinr() {
        let bs = Deployment { positions: vec![[0.0, 1.5]], colors: None };
        let cfg = NetworkConfig::interference_limited(1.0, 2.0, 3.5).with_noise(0.01);
        let mut rng = substream(1, 0, 0);
        let sinr = sample_sinr(&bs, [0.0, 0.0], &ChannelSpec::pathloss(), &cfg, true, &mut rng);
        assert!((sinr - 2.0 * 1.5f64.powf(-3.5) / 0.01).abs() < 1e-12);
    }

    #[test]
    fn other_colours_do_not_interfere() {
        let bs = Deployment {
            positions: vec![[1.0, 0.0], [-2.0, 0.0], [0.0, 1.1]],
            colors: Some(vec![2, 2, 1]),
        };
        let cfg = NetworkConfig::interference_limited(1.0, 1.0, 4.0);
        let mut rng = substream(1, 0, 0);
        let sinr = sample_sinr(&bs, [0.0, 0.0], &ChannelSpec::pathloss(), &cfg, true, &mut rng);
        assert!((sinr - 16.0).abs() < 1e-12);
    }

    #[test]
    fn noise_limited_matches_analytic() {
        let mut p = plan(ChannelSpec::pathloss(), 10.0, 500, 40);
        p.cfg = p.cfg.with_noise(0.1);
        p.interference = false;
        p.thresholds = [0.0, 5.0, 10.0, 15.0].map(db_to_linear).to_vec();
        let est = run(&p).unwrap();
        for ((&t, &pc), &se) in est.thresholds.iter().zip(&est.probabilities).zip(&est.stderr) {
            let exact = 1.0 - (-PI * (1.0 / (t * 0.1)).powf(0.5)).exp();
            assert!((pc - exact).abs() < 3.0 * se.max(1e-3), "T {t}: {pc} vs {exact} (se {se})");
        }
    }

    #[test]
    fn rayleigh_matches_closed_form() {
        let p = plan(ChannelSpec::rayleigh(), 12.0, 800, 24);
        let est = run(&p).unwrap();
        let exact = rayleigh_oracle(1.0);
        assert!((est.probabilities[0] - exact).abs() < 3.0 * est.stderr[0], "{est:?} vs {exact}");
    }

    #[test]
    fn identical_seed_is_bit_identical_across_thread_counts() {
        let mut p = plan(ChannelSpec::rician(db_to_linear(10.0)), 9.0, 200, 6);
        p.cfg.delta = 2;
        p.thresholds = vec![0.1, 1.0, 10.0];
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run(&p).unwrap());
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run(&p).unwrap());
        assert_eq!(one, four);
        let mut other = p.clone();
        other.seed += 1;
        assert_ne!(run(&other).unwrap(), one);
    }

    #[test]
    fn full_protocol_link_count() {
        let mut p = plan(ChannelSpec::pathloss(), 8.0, 6500, 80);
        p.thresholds = vec![1.0];
        let est = run(&p).unwrap();
        assert!(est.total_links >= 500_000);
        assert!((0.0..=1.0).contains(&est.probabilities[0]));
    }

    #[test]
    fn larger_deployment_disc_changes_little() {
        let thresholds: Vec<f64> = (-2..=4).map(|k| db_to_linear(5.0 * k as f64)).collect();
        let mut small = plan(ChannelSpec::rayleigh(), 10.0, 400, 20);
        small.obs_radius = 4.0;
        small.thresholds = thresholds;
        let mut large = small.clone();
        large.sim_radius = 20.0;
        let a = run(&small).unwrap();
        let b = run(&large).unwrap();
        for j in 0..a.thresholds.len() {
            let se = a.stderr[j].hypot(b.stderr[j]);
            assert!(
                (a.probabilities[j] - b.probabilities[j]).abs() <= 2.0 * se,
                "point {j}: {} vs {} (se {se})",
                a.probabilities[j],
                b.probabilities[j]
            );
        }
    }

    #[test]
    fn plan_validation() {
        let good = plan(ChannelSpec::rayleigh(), 10.0, 10, 2);
        assert!(good.validate().is_ok());
        let mut p = good.clone();
        p.obs_radius = 6.0;
        assert!(matches!(p.validate(), Err(SimulationError::Plan(_))));
        let mut p = good.clone();
        p.sim_radius = 7.0;
        p.obs_radius = 3.0;
        assert!(p.validate().is_err());
        let mut p = good.clone();
        p.runs = 1;
        assert!(p.validate().is_err());
        let mut p = good.clone();
        p.thresholds = vec![1.0, 0.5];
        assert!(p.validate().is_err());
        let mut p = good.clone();
        p.interference = false;
        assert!(p.validate().is_err());
        let mut p = good;
        p.spec.serving = FadingModel::Rician { k_factor: -1.0 };
        assert!(p.validate().is_err());
    }

    #[test]
    fn substreams_differ() {
        let a: u64 = substream(3, 0, 1).random();
        let b: u64 = substream(3, 0, 2).random();
        let c: u64 = substream(3, 1, 1).random();
        let d: u64 = substream(3, 0, 1).random();
        assert!(a != b && a != c && b != c);
        assert_eq!(a, d);
    }
}
