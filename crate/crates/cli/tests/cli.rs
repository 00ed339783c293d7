//! End-to-end runs of the `cellcov` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cellcov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellcov"))
        .args(args)
        .env_remove("CELLCOV_THREADS")
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = cellcov(args);
    assert!(
        out.status.success(),
        "cellcov {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"))
}

fn analytic_scenario(dir: &Path, name: &str, serving: &str, interferers: &str) -> PathBuf {
    let text = format!(
        "name = \"{name}\"\nmode = \"analytic\"\n\n[network]\nlambda = 1.0\np0 = 1.0\nalpha = 4.0\n\n\
         [channel.serving]\nmodel = \"{serving}\"\n\n[channel.interferers]\nmodel = \"{interferers}\"\n\n\
         [thresholds]\nstart_db = -10.0\nstop_db = 20.0\nstep_db = 2.5\n"
    );
    let path = dir.join(format!("{name}.toml"));
    std::fs::write(&path, text).unwrap();
    path
}

fn rayleigh_closed_form(t: f64) -> f64 {
    let s = t.sqrt();
    1.0 / (1.0 + s * (std::f64::consts::FRAC_PI_2 - (1.0 / s).atan()))
}

#[test]
fn pathloss_sweep_is_ordered_by_alpha() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    run_ok(&["run", "pathloss_alpha", "--out", out]);
    let (header, rows) = read_rows(&d.path().join("pathloss_alpha_coverage.csv"));
    let (ia, it, ip) = (col(&header, "alpha"), col(&header, "T_dB"), col(&header, "p_c_analytic"));
    let mut by_t: std::collections::BTreeMap<String, Vec<(f64, f64)>> = Default::default();
    for r in &rows {
        by_t.entry(r[it].clone())
            .or_default()
            .push((r[ia].parse().unwrap(), r[ip].parse().unwrap()));
    }
    assert_eq!(by_t.len(), 13);
    for (t, mut pts) in by_t {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pts.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-9, "T={t}: {pts:?}");
        }
    }
    for name in ["pathloss_alpha.meta.json", "pathloss_alpha_plot.py"] {
        assert!(d.path().join(name).exists(), "{name}");
    }
}

#[test]
fn both_mode_agrees_with_simulation() {
    let d = tempfile::tempdir().unwrap();
    run_ok(&["run", "rayleigh_sim", "--out", d.path().to_str().unwrap()]);
    let (header, rows) = read_rows(&d.path().join("rayleigh_sim_coverage.csv"));
    let (ia, im, is) = (col(&header, "p_c_analytic"), col(&header, "p_c_mc"), col(&header, "mc_stderr"));
    assert_eq!(rows.len(), 13);
    for r in &rows {
        let (a, m, s): (f64, f64, f64) = (r[ia].parse().unwrap(), r[im].parse().unwrap(), r[is].parse().unwrap());
        assert!((a - m).abs() <= 3.0 * s.max(1e-3), "{r:?}");
    }
}

#[test]
fn zero_reuse_factor_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let path = analytic_scenario(d.path(), "bad", "rayleigh", "rayleigh");
    let text = std::fs::read_to_string(&path).unwrap().replace("alpha = 4.0", "alpha = 4.0\ndelta = 0");
    std::fs::write(&path, text).unwrap();
    let out = cellcov(&["run", path.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("delta must be >= 1"), "{err}");
    assert!(!d.path().join("bad_coverage.csv").exists());
}

#[test]
fn compare_against_oracle_and_other_channel() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    let ray = analytic_scenario(d.path(), "ray", "rayleigh", "rayleigh");
    let det = analytic_scenario(d.path(), "det", "deterministic", "deterministic");
    run_ok(&["run", ray.to_str().unwrap(), "--out", out]);
    run_ok(&["run", det.to_str().unwrap(), "--out", out]);
    let ray_csv = d.path().join("ray_coverage.csv");
    let det_csv = d.path().join("det_coverage.csv");

    let (header, rows) = read_rows(&ray_csv);
    let it = col(&header, "T_dB");
    let mut oracle = String::from("T_dB,p_c_analytic\n");
    for r in &rows {
        let t_db: f64 = r[it].parse().unwrap();
        oracle.push_str(&format!("{},{:.12}\n", r[it], rayleigh_closed_form(10f64.powf(t_db / 10.0))));
    }
    let oracle_csv = d.path().join("oracle.csv");
    std::fs::write(&oracle_csv, oracle).unwrap();

    let s = |p: &Path| p.to_str().unwrap().to_string();
    let same = cellcov(&["compare", &s(&ray_csv), &s(&ray_csv), "--tol", "0"]);
    assert!(same.status.success());
    let vs_oracle = cellcov(&["compare", &s(&ray_csv), &s(&oracle_csv), "--tol", "0.005"]);
    assert!(vs_oracle.status.success(), "{}", String::from_utf8_lossy(&vs_oracle.stdout));
    let vs_det = cellcov(&["compare", &s(&ray_csv), &s(&det_csv), "--tol", "0.005"]);
    assert_eq!(vs_det.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&vs_det.stdout).contains("FAIL"));
}

#[test]
fn reruns_with_the_same_seed_are_identical() {
    let d = tempfile::tempdir().unwrap();
    let path = d.path().join("small.toml");
    let text = "name = \"small\"\nmode = \"both\"\n\n[network]\nlambda = 1.0\np0 = 1.0\nalpha = 4.0\n\n\
                [channel.serving]\nmodel = \"rayleigh\"\n\n[channel.interferers]\nmodel = \"rayleigh\"\n\n\
                [thresholds]\nvalues_db = [0.0, 5.0]\n\n\
                [simulation]\nsim_radius = 12.0\nobs_radius = 6.0\nusers_per_run = 200\nruns = 4\nseed = 9\n";
    std::fs::write(&path, text).unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = d.path().join(format!("out{i}"));
        run_ok(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads]);
        outputs.push(std::fs::read(out.join("small_coverage.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let other = d.path().join("other");
    run_ok(&["run", path.to_str().unwrap(), "--out", other.to_str().unwrap(), "--seed", "10"]);
    assert_ne!(std::fs::read(other.join("small_coverage.csv")).unwrap(), outputs[0]);
}

#[test]
fn bundled_scenarios_are_listed() {
    let out = run_ok(&["list-scenarios"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["pathloss_alpha", "rayleigh_sim", "rician_k", "frequency_reuse", "rate_gamma_min"] {
        assert!(text.contains(name), "{text}");
    }
}

#[test]
fn rates_can_be_written_in_bits() {
    let d = tempfile::tempdir().unwrap();
    let path = d.path().join("rate.toml");
    let text = "name = \"rate\"\nmode = \"analytic\"\n\n[network]\nlambda = 1.0\np0 = 1.0\nalpha = 4.0\n\n\
                [channel.serving]\nmodel = \"rayleigh\"\n\n[channel.interferers]\nmodel = \"rayleigh\"\n\n\
                [thresholds]\nvalues_db = [0.0]\n\n[rate]\ngamma_o = 1.0\ngamma_min = [0.0]\n\n\
                [options]\nr_nodes = 12\ngain_nodes = 12\n";
    std::fs::write(&path, text).unwrap();
    let read = |dir: &Path, column: &str| {
        let (header, rows) = read_rows(&dir.join("rate_rate.csv"));
        rows[0][col(&header, column)].parse::<f64>().unwrap()
    };
    let nats = d.path().join("nats");
    let bits = d.path().join("bits");
    run_ok(&["run", path.to_str().unwrap(), "--out", nats.to_str().unwrap()]);
    run_ok(&["run", path.to_str().unwrap(), "--out", bits.to_str().unwrap(), "--bits"]);
    let n = read(&nats, "rate_direct_nats");
    let b = read(&bits, "rate_direct_bits");
    assert!((b - n / std::f64::consts::LN_2).abs() < 1e-7 * b, "{n} nats vs {b} bits");
}
