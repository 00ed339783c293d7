//! Scenario files and their resolution into linear-unit configurations.
//!
//! Files are TOML. Quantities given in dB carry an explicit `_db` suffix;
//! everything else is linear. This module is the only place where dB
//! values are converted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cellcov::coverage::{ChannelSpec, CoverageOptions, RadialRule};
use cellcov::fading::{db_to_linear, FadingModel};
use cellcov::interference::{NetworkConfig, Noise};

use crate::CliError;

/// Scenario files shipped with the tool.
pub const BUNDLED: &[(&str, &str)] = &[
    ("pathloss_alpha", include_str!("../scenarios/pathloss_alpha.toml")),
    ("rayleigh_sim", include_str!("../scenarios/rayleigh_sim.toml")),
    ("rician_k", include_str!("../scenarios/rician_k.toml")),
    ("frequency_reuse", include_str!("../scenarios/frequency_reuse.toml")),
    ("rate_gamma_min", include_str!("../scenarios/rate_gamma_min.toml")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Analytic,
    #[serde(alias = "mc")]
    Montecarlo,
    Both,
}

impl Mode {
    pub fn analytic(self) -> bool {
        matches!(self, Mode::Analytic | Mode::Both)
    }

    pub fn montecarlo(self) -> bool {
        matches!(self, Mode::Montecarlo | Mode::Both)
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "analytic" => Ok(Mode::Analytic),
            "mc" | "montecarlo" => Ok(Mode::Montecarlo),
            "both" => Ok(Mode::Both),
            other => Err(CliError::Validation(format!(
                "unknown mode '{other}', expected analytic, mc or both"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub lambda: f64,
    pub p0: f64,
    pub alpha: f64,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub delta: u32,
    /// Noise power in watts; absent means interference-limited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_w: Option<f64>,
    /// Noise power in dBW.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_db: Option<f64>,
}

fn one() -> u32 {
    1
}

fn is_one(v: &u32) -> bool {
    *v == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum FadingSection {
    Deterministic,
    Rayleigh,
    Rician {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        k_db: Option<f64>,
    },
    Lognormal {
        sigma_db: f64,
    },
    Product {
        first: Box<FadingSection>,
        second: Box<FadingSection>,
    },
}

impl FadingSection {
    fn resolve(&self, role: &str) -> Result<FadingModel, CliError> {
        Ok(match self {
            FadingSection::Deterministic => FadingModel::Deterministic,
            FadingSection::Rayleigh => FadingModel::Rayleigh,
            FadingSection::Rician { k, k_db } => match (k, k_db) {
                (Some(k), None) => FadingModel::Rician { k_factor: *k },
                (None, Some(db)) => FadingModel::rician_db(*db),
                _ => {
                    return Err(CliError::Validation(format!(
                        "{role}: a Rician model needs exactly one of k or k_db"
                    )))
                }
            },
            FadingSection::Lognormal { sigma_db } => FadingModel::LognormalShadow { sigma_db: *sigma_db },
            FadingSection::Product { first, second } => {
                FadingModel::product(first.resolve(role)?, second.resolve(role)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub serving: FadingSection,
    pub interferers: FadingSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values_db: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_db: Option<f64>,
}

impl ThresholdSection {
    fn resolve(&self) -> Result<Vec<f64>, CliError> {
        let grid = match (self, &self.values_db) {
            (ThresholdSection { start_db: None, stop_db: None, step_db: None, .. }, Some(v)) => v.clone(),
            (
                ThresholdSection {
                    start_db: Some(a),
                    stop_db: Some(b),
                    step_db: Some(h),
                    ..
                },
                None,
            ) => {
                if !(*h > 0.0 && b >= a) {
                    return Err(CliError::Validation(format!(
                        "thresholds: need step_db > 0 and stop_db >= start_db, got {a}..{b} step {h}"
                    )));
                }
                let n = ((b - a) / h + 1e-9).floor() as usize + 1;
                (0..n).map(|k| a + k as f64 * h).collect()
            }
            _ => {
                return Err(CliError::Validation(
                    "thresholds: give either values_db or all of start_db, stop_db, step_db".into(),
                ))
            }
        };
        strictly_increasing("thresholds", &grid)?;
        Ok(grid)
    }
}

fn strictly_increasing(what: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(CliError::Validation(format!("{what}: grid is empty")));
    }
    if let Some(i) = v.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(CliError::Validation(format!(
            "{what}: grid must be strictly increasing (entry {} = {} follows {})",
            i + 1,
            v[i + 1],
            v[i]
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Alpha,
    Delta,
    Lambda,
    /// Rician K factor of the serving link, in dB.
    ServingKDb,
}

impl SweepParameter {
    pub fn column(self) -> &'static str {
        match self {
            SweepParameter::Alpha => "alpha",
            SweepParameter::Delta => "delta",
            SweepParameter::Lambda => "lambda",
            SweepParameter::ServingKDb => "serving_k_db",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_o: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_o_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_min: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_min_db: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub sim_radius: f64,
    pub obs_radius: f64,
    pub users_per_run: usize,
    pub runs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_convergence: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometric_radial: Option<bool>,
}

/// A scenario file as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub network: NetworkSection,
    pub channel: ChannelSection,
    pub thresholds: ThresholdSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub options: OptionsSection,
}

fn is_default(o: &OptionsSection) -> bool {
    *o == OptionsSection::default()
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("scenario parse error: {e}")))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Validation(format!("cannot serialize scenario: {e}")))
    }

    pub fn resolve(&self) -> Result<Scenario, CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(CliError::Validation(format!(
                "name must be a non-empty file stem, got '{}'",
                self.name
            )));
        }
        let n = &self.network;
        let noise = match (n.noise_w, n.noise_db) {
            (None, None) => Noise::InterferenceLimited,
            (Some(w), None) => Noise::Thermal { watts: w },
            (None, Some(db)) => Noise::Thermal { watts: db_to_linear(db) },
            _ => {
                return Err(CliError::Validation(
                    "network: give at most one of noise_w and noise_db".into(),
                ))
            }
        };
        let cfg = NetworkConfig {
            lambda: n.lambda,
            p0: n.p0,
            alpha: n.alpha,
            noise,
            delta: n.delta,
        };
        cfg.validate().map_err(|e| CliError::Validation(format!("network: {e}")))?;
        let spec = ChannelSpec::new(
            self.channel.serving.resolve("channel.serving")?,
            self.channel.interferers.resolve("channel.interferers")?,
        );
        spec.validate().map_err(|e| CliError::Validation(format!("channel: {e}")))?;
        let thresholds_db = self.thresholds.resolve()?;

        let series = self.series(&cfg, &spec)?;

        let rate = self.rate.as_ref().map(resolve_rate).transpose()?;
        if self.mode.montecarlo() && self.simulation.is_none() {
            return Err(CliError::Validation(
                "mode includes montecarlo but the [simulation] section is missing".into(),
            ));
        }
        let defaults = CoverageOptions::default();
        let o = &self.options;
        let options = CoverageOptions {
            r_nodes: o.r_nodes.unwrap_or(defaults.r_nodes),
            gain_nodes: o.gain_nodes.unwrap_or(defaults.gain_nodes),
            check_convergence: o.check_convergence.unwrap_or(defaults.check_convergence),
            radial: if o.geometric_radial.unwrap_or(false) {
                RadialRule::Geometric
            } else {
                defaults.radial
            },
            ..defaults
        };
        options
            .validate()
            .map_err(|e| CliError::Validation(format!("options: {e}")))?;
        Ok(Scenario {
            name: self.name.clone(),
            mode: self.mode,
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
            thresholds: thresholds_db.iter().map(|&d| db_to_linear(d)).collect(),
            thresholds_db,
            sweep_parameter: self.sweep.as_ref().map(|s| s.parameter),
            series,
            rate,
            simulation: self.simulation,
            options,
        })
    }

    fn series(&self, cfg: &NetworkConfig, spec: &ChannelSpec) -> Result<Vec<Series>, CliError> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![Series {
                value: None,
                cfg: *cfg,
                spec: spec.clone(),
            }]);
        };
        if sweep.values.is_empty() {
            return Err(CliError::Validation("sweep: values must not be empty".into()));
        }
        sweep
            .values
            .iter()
            .map(|&v| {
                let mut c = *cfg;
                let mut s = spec.clone();
                match sweep.parameter {
                    SweepParameter::Alpha => c.alpha = v,
                    SweepParameter::Lambda => c.lambda = v,
                    SweepParameter::Delta => {
                        if v.fract() != 0.0 || v < 0.0 {
                            return Err(CliError::Validation(format!(
                                "sweep: delta values must be integers >= 1, got {v}"
                            )));
                        }
                        c.delta = v as u32;
                    }
                    SweepParameter::ServingKDb => s.serving = FadingModel::rician_db(v),
                }
                c.validate()
                    .map_err(|e| CliError::Validation(format!("sweep {} = {v}: {e}", sweep.parameter.column())))?;
                s.validate()
                    .map_err(|e| CliError::Validation(format!("sweep {} = {v}: {e}", sweep.parameter.column())))?;
                Ok(Series {
                    value: Some(v),
                    cfg: c,
                    spec: s,
                })
            })
            .collect()
    }
}

fn resolve_rate(r: &RateSection) -> Result<ResolvedRate, CliError> {
    let gamma_o = match (r.gamma_o, r.gamma_o_db) {
        (Some(g), None) => g,
        (None, Some(db)) => db_to_linear(db),
        (None, None) => 1.0,
        _ => return Err(CliError::Validation("rate: give at most one of gamma_o and gamma_o_db".into())),
    };
    if !(gamma_o.is_finite() && gamma_o > 0.0) {
        return Err(CliError::Validation(format!("rate: gamma_o must be > 0, got {gamma_o}")));
    }
    let gamma_min = match (&r.gamma_min, &r.gamma_min_db) {
        (Some(g), None) => g.clone(),
        (None, Some(db)) => db.iter().map(|&d| db_to_linear(d)).collect(),
        _ => {
            return Err(CliError::Validation(
                "rate: give exactly one of gamma_min and gamma_min_db".into(),
            ))
        }
    };
    strictly_increasing("rate.gamma_min", &gamma_min)?;
    if gamma_min[0] < 0.0 {
        return Err(CliError::Validation("rate: gamma_min values must be >= 0".into()));
    }
    Ok(ResolvedRate { gamma_o, gamma_min })
}

/// One curve of a scenario: the base configuration or one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    /// Value of the swept parameter, if any.
    pub value: Option<f64>,
    pub cfg: NetworkConfig,
    pub spec: ChannelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedRate {
    pub gamma_o: f64,
    pub gamma_min: Vec<f64>,
}

/// A fully resolved scenario in linear units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub mode: Mode,
    pub output_dir: PathBuf,
    pub thresholds_db: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub sweep_parameter: Option<SweepParameter>,
    pub series: Vec<Series>,
    pub rate: Option<ResolvedRate>,
    pub simulation: Option<SimulationSection>,
    pub options: CoverageOptions,
}

/// Text of a scenario given as a path or the name of a bundled scenario.
pub fn load_text(target: &str) -> Result<String, CliError> {
    let path = Path::new(target);
    if path.exists() {
        return std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())));
    }
    let stem = target.strip_suffix(".toml").unwrap_or(target);
    BUNDLED
        .iter()
        .find(|(name, _)| *name == stem)
        .map(|(_, text)| text.to_string())
        .ok_or_else(|| {
            CliError::Validation(format!(
                "no scenario file '{target}' and no bundled scenario of that name"
            ))
        })
}
