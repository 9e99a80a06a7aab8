use std::path::Path;
use std::process::{Command, Output};

use qkr_cli::output::{RunManifest, Table};
use serde_json::Value;

fn qkr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkr")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

const SMALL: &str = "[simulation]\nn_kicks = 30\nn_traj = 64\nn_max = 256\ncheckpoints = [15, 30]\n";

#[test]
fn simulate_writes_documented_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    let res = qkr(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let energy = Table::read(&out.join("energy.csv")).unwrap();
    assert_eq!(energy.header, ["t", "E_unfiltered", "E_filtered", "F0", "FDelta", "detected"]);
    assert_eq!(energy.rows.len(), 31);
    let dist = Table::read(&out.join("dist_t15.csv")).unwrap();
    assert_eq!(dist.header, ["P_over_kbar", "f_unfiltered", "f_filtered"]);
    let total: f64 = dist.dense_column("f_unfiltered").unwrap().iter().sum();
    assert!((total - 1.0).abs() < 1e-9);

    let manifest = RunManifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.params.n_traj, 64);
    assert_eq!(manifest.files.len(), 3);
    for (name, digest) in &manifest.files {
        assert_eq!(&qkr_cli::output::sha256_file(&out.join(name)).unwrap(), digest);
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[simulation]\nPi = 0.05\nn_kicks = 20\nn_traj = 32\nn_max = 128\ncheckpoints = []\n");
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let res = qkr(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(res.status.success());
        (
            std::fs::read(out.join("energy.csv")).unwrap(),
            RunManifest::read(&out.join("manifest.json")).unwrap().params.seed,
        )
    };
    let (a, seed_a) = run("a", "1");
    let (b, _) = run("b", "2");
    let (c, _) = run("c", "1");
    assert_eq!(seed_a, 1);
    assert_ne!(a, b);
    assert_eq!(a, c);
}

#[test]
fn without_emission_filtered_energy_equals_unfiltered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}Pi = 0.0\n"));
    let out = dir.path().join("run");
    assert!(qkr(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let t = Table::read(&out.join("energy.csv")).unwrap();
    let raw = |name: &str| {
        let i = t.header.iter().position(|h| h == name).unwrap();
        t.rows.iter().map(|r| r[i].clone()).collect::<Vec<_>>()
    };
    assert_eq!(raw("E_filtered"), raw("E_unfiltered"));
}

#[test]
fn config_errors_exit_with_two_and_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[simulation]\nK = 10.0\nDelta = 1.5\n");
    let res = qkr(&["simulate", "--config", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&res.stderr);
    assert!(msg.contains("line 3") && msg.contains("Delta"), "{msg}");

    let res = qkr(&["simulate", "--config", "/nonexistent.toml", "--out", "/tmp/unused"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn boundary_leak_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[simulation]\nn_max = 8\nn_kicks = 5\nn_traj = 4\ncheckpoints = []\n");
    let res = qkr(&["simulate", "--config", &cfg, "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&res.stderr);
    assert!(msg.contains("trajectory 0") && msg.contains("n_max"), "{msg}");
}

#[test]
fn sweep_creates_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}[sweep]\nPi = [0.0, 0.03]\n"));
    let out = dir.path().join("sweep");
    let res = qkr(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    assert_eq!(stdout_json(&res).as_array().unwrap().len(), 2);
    for name in ["pi_0", "pi_0.03"] {
        let m = RunManifest::read(&out.join(name).join("manifest.json")).unwrap();
        assert_eq!(m.params.Pi, if name == "pi_0" { 0.0 } else { 0.03 });
    }

    let empty = write_config(dir.path(), SMALL);
    assert_eq!(qkr(&["sweep", "--config", &empty, "--out", out.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn model_reports_infinite_times_without_emission() {
    let res = qkr(&["model", "--pi", "0"]);
    assert!(res.status.success());
    let v = stdout_json(&res);
    assert_eq!(v["t1"], "inf");
    assert_eq!(v["t2_exact"], "inf");
    assert_eq!(v["t2_approx"], "inf");
}

#[test]
fn model_with_full_window_detects_everything() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let res = qkr(&["model", "--pi", "0.02", "--delta", "1", "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let t = Table::read(&out.join("model.csv")).unwrap();
    assert_eq!(t.rows.len(), 501);
    assert!(t.dense_column("detected").unwrap().iter().all(|&d| (d - 1.0).abs() < 1e-15));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("model_summary.json")).unwrap()).unwrap();
    assert!(summary["t1"].is_number());
}

#[test]
fn invalid_model_parameters_exit_with_two() {
    assert_eq!(qkr(&["model", "--d-q", "-1"]).status.code(), Some(2));
    assert_eq!(qkr(&["model", "--delta", "0"]).status.code(), Some(2));
}

/// Writes an energy.csv whose filtered column follows the model exactly.
fn synthetic_energy(dir: &Path, d_q: f64, t_s: f64, pi: f64) -> String {
    let mp = qkr::ModelParams::new(d_q, t_s, pi, 0.04).unwrap();
    let rows = (0..=300).map(|t| {
        let e = qkr::model::e_bar(t as f64, &mp);
        let f = qkr_cli::output::fmt_num;
        vec![t.to_string(), f(e), f(e), f(1.0), f(0.0), f(1.0)]
    });
    let path = dir.join("energy.csv");
    qkr_cli::output::write_rows(&path, &qkr_cli::output::ENERGY_COLUMNS, rows).unwrap();
    path.display().to_string()
}

#[test]
fn fit_recovers_model_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synthetic_energy(dir.path(), 30.7, 41.3, 0.01);
    let res = qkr(&["fit", &csv, "--pi", "0.01", "--delta", "0.04"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let v = stdout_json(&res);
    assert!((v["D_q"].as_f64().unwrap() / 30.7 - 1.0).abs() < 1e-4, "{v}");
    assert!((v["t_s"].as_f64().unwrap() / 41.3 - 1.0).abs() < 1e-4, "{v}");
    assert_eq!(v["converged"], true);
}

#[test]
fn exhausted_fit_budget_exits_with_four_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synthetic_energy(dir.path(), 30.7, 41.3, 0.01);
    let res = qkr(&["fit", &csv, "--pi", "0.01", "--delta", "0.04", "--max-evals", "3"]);
    assert_eq!(res.status.code(), Some(4));
    let v = stdout_json(&res);
    assert_eq!(v["converged"], false);
    assert!(v["D_q"].is_number());
}

#[test]
fn fit_without_parameters_or_manifest_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synthetic_energy(dir.path(), 30.7, 41.3, 0.01);
    let res = qkr(&["fit", &csv]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("--pi"));
}

#[test]
fn fit_reads_parameters_from_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[simulation]\nPi = 0.01\nn_kicks = 40\nn_traj = 32\nn_max = 256\ncheckpoints = []\n");
    let out = dir.path().join("run");
    assert!(qkr(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let res = qkr(&["fit", out.join("energy.csv").to_str().unwrap(), "--format", "csv"]);
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.starts_with("key,value\n"));
    assert!(text.contains("\nPi,1.0000000000000000e-2\n"), "{text}");
    assert!(matches!(res.status.code(), Some(0) | Some(4)));
}

#[test]
fn classify_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "P_over_kbar,f_unfiltered,f_filtered\n0,1,x\n1,1,1\n").unwrap();
    assert_eq!(qkr(&["classify", path.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&path, "P_over_kbar,f_unfiltered,f_filtered\n0,1,1\n1,0.5,0.5\n").unwrap();
    assert_eq!(qkr(&["classify", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn classify_recognizes_an_exponential_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let rows = (-60..=60).map(|p| {
        let f = (-(p as f64).abs() / 12.0).exp();
        let s = qkr_cli::output::fmt_num;
        vec![s(p as f64), s(f), s(f)]
    });
    qkr_cli::output::write_rows(&path, &qkr_cli::output::DIST_COLUMNS, rows).unwrap();
    let v = stdout_json(&qkr(&["classify", path.to_str().unwrap()]));
    assert_eq!(v["verdict"], "exponential");
    assert!((v["P_L"].as_f64().unwrap() - 12.0).abs() < 0.24);
}

#[test]
fn classical_trace_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let res = qkr(&["classical", "--steps", "50", "--particles", "3000", "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(res.status.success());
        std::fs::read(out.join("classical.csv")).unwrap()
    };
    assert_eq!(run("a", "1"), run("b", "3"));
    assert_eq!(qkr(&["classical", "--k", "-1"]).status.code(), Some(2));
}
