//! Runs a resolved scenario and writes its artifacts.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use cellcov::coverage::{coverage_curve, CoverageOptions, CurveMetadata, PointStatus};
use cellcov::fading::db_to_linear;
use cellcov::montecarlo::{self, SimulationPlan};
use cellcov::rate::{rate_from_ccdf, rate_options, rate_vs_gamma_min, RateParams};

use crate::scenario::{Mode, Scenario, Series};
use crate::CliError;

/// dB span of the auxiliary CCDF used by the CCDF form of the rate.
const RATE_GRID_DB: (f64, f64, usize) = (-60.0, 60.0, 121);

/// Overrides given on the command line.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Report rates in bits instead of nats.
    pub bits: bool,
}

fn rate_unit(bits: bool) -> (&'static str, f64) {
    if bits {
        ("bits", std::f64::consts::LOG2_E)
    } else {
        ("nats", 1.0)
    }
}

/// Files written by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub coverage_csv: PathBuf,
    pub rate_csv: Option<PathBuf>,
    pub meta_json: PathBuf,
    pub plot_script: PathBuf,
    /// Rows whose status is not `ok`.
    pub flagged_rows: usize,
}

/// Nine significant digits.
pub fn fmt(v: f64) -> String {
    format!("{v:.8e}")
}

struct CoverageRow {
    sweep: Option<f64>,
    t_db: f64,
    analytic: Option<f64>,
    mc: Option<(f64, f64)>,
    status: String,
}

struct RateRow {
    sweep: Option<f64>,
    gamma_min: f64,
    direct: f64,
    ccdf: Option<f64>,
    boundary: f64,
    status: String,
}

#[derive(Serialize)]
struct SeriesMeta {
    value: Option<f64>,
    fingerprint: String,
    mc_total_links: Option<usize>,
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    mode: Mode,
    seed: Option<u64>,
    scenario: &'a Scenario,
    series: Vec<SeriesMeta>,
    outputs: Vec<String>,
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

pub fn run_scenario(mut scenario: Scenario, overrides: &RunOverrides) -> Result<Artifacts, CliError> {
    if let Some(m) = overrides.mode {
        scenario.mode = m;
    }
    if let Some(out) = &overrides.out {
        scenario.output_dir = out.clone();
    }
    if let (Some(seed), Some(sim)) = (overrides.seed, scenario.simulation.as_mut()) {
        sim.seed = seed;
    }
    if scenario.mode.montecarlo() && scenario.simulation.is_none() {
        return Err(CliError::Validation(
            "montecarlo mode requested but the scenario has no [simulation] section".into(),
        ));
    }

    let mut rows = Vec::new();
    let mut series_meta = Vec::new();
    for series in &scenario.series {
        let (mut part, meta) = coverage_rows(&scenario, series)?;
        rows.append(&mut part);
        series_meta.push(meta);
    }
    let rate_rows = match &scenario.rate {
        Some(_) => {
            let mut all = Vec::new();
            for series in &scenario.series {
                all.append(&mut rate_rows(&scenario, series)?);
            }
            Some(all)
        }
        None => None,
    };

    let dir = &scenario.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let column = scenario.sweep_parameter.map(|p| p.column());
    let coverage_csv = dir.join(format!("{}_coverage.csv", scenario.name));
    write_coverage(&coverage_csv, column, scenario.mode, &rows)?;
    let mut flagged_rows = rows.iter().filter(|r| r.status != "ok").count();
    let mut outputs = vec![file_name(&coverage_csv)];

    let rate_csv = match &rate_rows {
        Some(rr) => {
            let p = dir.join(format!("{}_rate.csv", scenario.name));
            write_rate(&p, column, rr, overrides.bits)?;
            flagged_rows += rr.iter().filter(|r| r.status != "ok").count();
            outputs.push(file_name(&p));
            Some(p)
        }
        None => None,
    };

    let plot_script = dir.join(format!("{}_plot.py", scenario.name));
    write_file(&plot_script, &plot_script_text(&scenario, column, rate_csv.is_some(), overrides.bits))?;
    outputs.push(file_name(&plot_script));

    let meta_json = dir.join(format!("{}.meta.json", scenario.name));
    let meta = Meta {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        mode: scenario.mode,
        seed: scenario.simulation.filter(|_| scenario.mode.montecarlo()).map(|s| s.seed),
        scenario: &scenario,
        series: series_meta,
        outputs,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Validation(e.to_string()))?;
    write_file(&meta_json, &(json + "\n"))?;

    Ok(Artifacts {
        coverage_csv,
        rate_csv,
        meta_json,
        plot_script,
        flagged_rows,
    })
}

fn coverage_rows(scenario: &Scenario, series: &Series) -> Result<(Vec<CoverageRow>, SeriesMeta), CliError> {
    let n = scenario.thresholds.len();
    let mut statuses = vec!["ok".to_string(); n];
    let mut analytic = vec![None; n];
    let fingerprint = CurveMetadata::new(series.cfg, series.spec.clone()).fingerprint;
    if scenario.mode.analytic() {
        let curve = coverage_curve(&series.cfg, &series.spec, &scenario.thresholds, &scenario.options)
            .map_err(numerical)?;
        for (j, p) in curve.points.iter().enumerate() {
            analytic[j] = Some(p.probability);
            if p.status != PointStatus::Ok {
                statuses[j] = p.status.as_str().to_string();
            }
        }
    }
    let mut mc = vec![None; n];
    let mut links = None;
    if scenario.mode.montecarlo() {
        let sim = scenario.simulation.expect("checked by the caller");
        let plan = SimulationPlan {
            cfg: series.cfg,
            spec: series.spec.clone(),
            sim_radius: sim.sim_radius,
            obs_radius: sim.obs_radius,
            users_per_run: sim.users_per_run,
            runs: sim.runs,
            seed: sim.seed,
            thresholds: scenario.thresholds.clone(),
            interference: true,
        };
        let est = montecarlo::run(&plan).map_err(|e| CliError::Validation(e.to_string()))?;
        for j in 0..n {
            mc[j] = Some((est.probabilities[j], est.stderr[j]));
        }
        links = Some(est.total_links);
    }
    let rows = (0..n)
        .map(|j| CoverageRow {
            sweep: series.value,
            t_db: scenario.thresholds_db[j],
            analytic: analytic[j],
            mc: mc[j],
            status: statuses[j].clone(),
        })
        .collect();
    Ok((
        rows,
        SeriesMeta {
            value: series.value,
            fingerprint,
            mc_total_links: links,
        },
    ))
}

fn rate_rows(scenario: &Scenario, series: &Series) -> Result<Vec<RateRow>, CliError> {
    let rate = scenario.rate.as_ref().expect("checked by the caller");
    let opts = CoverageOptions {
        radial: rate_options().radial,
        ..scenario.options
    };
    let direct = rate_vs_gamma_min(&series.cfg, &series.spec, rate.gamma_o, &rate.gamma_min, &opts).map_err(numerical)?;
    let (lo, hi, n) = RATE_GRID_DB;
    let grid: Vec<f64> = (0..n)
        .map(|k| db_to_linear(lo + (hi - lo) * k as f64 / (n - 1) as f64))
        .collect();
    let curve = coverage_curve(&series.cfg, &series.spec, &grid, &opts).map_err(numerical)?;
    let mut rows = Vec::with_capacity(direct.len());
    for d in direct {
        let params = RateParams::new(rate.gamma_o, d.gamma_min).map_err(numerical)?;
        let (ccdf, mut status) = match rate_from_ccdf(&curve, &params) {
            Ok(r) => (Some(r.value()), "ok".to_string()),
            Err(e) => {
                log::warn!("CCDF-form rate at gamma_min={}: {e}", d.gamma_min);
                (None, "ccdf_failed".to_string())
            }
        };
        if d.failed_nodes > 0 {
            status = "partial".into();
        }
        rows.push(RateRow {
            sweep: series.value,
            gamma_min: d.gamma_min,
            direct: d.total,
            ccdf,
            boundary: d.boundary,
            status,
        });
    }
    Ok(rows)
}

fn io_error(p: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", p.display()))
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn write_file(p: &Path, text: &str) -> Result<(), CliError> {
    let mut f = fs::File::create(p).map_err(|e| io_error(p, e))?;
    f.write_all(text.as_bytes()).map_err(|e| io_error(p, e))
}

fn csv_error(p: &Path, e: csv::Error) -> CliError {
    CliError::Io(format!("{}: {e}", p.display()))
}

fn write_coverage(p: &Path, sweep: Option<&str>, mode: Mode, rows: &[CoverageRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(p).map_err(|e| csv_error(p, e))?;
    let mut header: Vec<&str> = sweep.into_iter().collect();
    header.push("T_dB");
    if mode.analytic() {
        header.push("p_c_analytic");
    }
    if mode.montecarlo() {
        header.extend(["p_c_mc", "mc_stderr"]);
    }
    header.push("status");
    w.write_record(&header).map_err(|e| csv_error(p, e))?;
    for r in rows {
        let mut rec: Vec<String> = r.sweep.map(fmt).into_iter().collect();
        rec.push(fmt(r.t_db));
        if mode.analytic() {
            rec.push(r.analytic.map_or_else(|| "nan".into(), fmt));
        }
        if mode.montecarlo() {
            let (p, se) = r.mc.unwrap_or((f64::NAN, f64::NAN));
            rec.push(fmt(p));
            rec.push(fmt(se));
        }
        rec.push(r.status.clone());
        w.write_record(&rec).map_err(|e| csv_error(p, e))?;
    }
    w.flush().map_err(|e| io_error(p, e))
}

fn write_rate(p: &Path, sweep: Option<&str>, rows: &[RateRow], bits: bool) -> Result<(), CliError> {
    let (unit, scale) = rate_unit(bits);
    let mut w = csv::Writer::from_path(p).map_err(|e| csv_error(p, e))?;
    let mut header: Vec<String> = sweep.into_iter().map(str::to_string).collect();
    header.push("gamma_min".into());
    for c in ["rate_direct", "rate_ccdf", "boundary"] {
        header.push(format!("{c}_{unit}"));
    }
    header.push("status".into());
    w.write_record(&header).map_err(|e| csv_error(p, e))?;
    for r in rows {
        let mut rec: Vec<String> = r.sweep.map(fmt).into_iter().collect();
        rec.push(fmt(r.gamma_min));
        rec.push(fmt(scale * r.direct));
        rec.push(r.ccdf.map_or_else(|| "nan".into(), |v| fmt(scale * v)));
        rec.push(fmt(scale * r.boundary));
        rec.push(r.status.clone());
        w.write_record(&rec).map_err(|e| csv_error(p, e))?;
    }
    w.flush().map_err(|e| io_error(p, e))
}

fn plot_script_text(s: &Scenario, sweep: Option<&str>, with_rate: bool, bits: bool) -> String {
    let group = sweep.map_or("None".to_string(), |c| format!("{c:?}"));
    let mut text = format!(
        r#"#!/usr/bin/env python3
# Renders {name}_coverage.csv{rate_note}. Run from the output directory.
import csv
from collections import defaultdict

import matplotlib.pyplot as plt

GROUP = {group}


def load(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def grouped(rows, x, y):
    out = defaultdict(lambda: ([], []))
    for r in rows:
        if r.get(y, "nan") == "nan":
            continue
        key = r[GROUP] if GROUP else ""
        out[key][0].append(float(r[x]))
        out[key][1].append(float(r[y]))
    return out


rows = load("{name}_coverage.csv")
fig, ax = plt.subplots()
for column, style in (("p_c_analytic", "-"), ("p_c_mc", "o")):
    if rows and column in rows[0]:
        for key, (xs, ys) in grouped(rows, "T_dB", column).items():
            label = column if not GROUP else f"{{GROUP}}={{float(key):g}} {{column}}"
            ax.plot(xs, ys, style, label=label)
ax.set_xlabel("SINR threshold T (dB)")
ax.set_ylabel("coverage probability")
ax.grid(True)
ax.legend()
fig.savefig("{name}_coverage.png", dpi=150)
"#,
        name = s.name,
        rate_note = if with_rate { " and the rate CSV" } else { "" },
    );
    if with_rate {
        text.push_str(&format!(
            r#"
rows = load("{name}_rate.csv")
fig, ax = plt.subplots()
for column in ("rate_direct_{unit}", "rate_ccdf_{unit}"):
    for key, (xs, ys) in grouped(rows, "gamma_min", column).items():
        ax.plot(xs, ys, label=column if not GROUP else f"{{GROUP}}={{float(key):g}} {{column}}")
ax.set_xlabel("minimum SINR (linear)")
ax.set_ylabel("average rate ({unit}/s/Hz)")
ax.grid(True)
ax.legend()
fig.savefig("{name}_rate.png", dpi=150)
"#,
            name = s.name,
            unit = rate_unit(bits).0,
        ));
    }
    text
}
