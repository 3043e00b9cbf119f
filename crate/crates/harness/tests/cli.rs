use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn adaconv(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_adaconv"));
    cmd.args(args).env_remove("ADACONV_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

const SMALL_SWEEP: &str = r#"{
    "vary": "one_minus_beta2",
    "grid": [1e-4, 1e-3, 1e-2],
    "iterations": 2000,
    "runs": 2,
    "warm_start": {"phases": [{"iterations": 1000, "alpha": 1e-2}]}
}"#;

#[test]
fn sweep_then_regress() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", SMALL_SWEEP);
    let out = dir.path().join("out");
    let out_s = out.display().to_string();
    let run = adaconv(&["sweep", "--config", &cfg, "--out", &out_s, "--jobs", "2"], &[]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = out.join("one_minus_beta2.csv");
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 4);
    let sidecar: Value = serde_json::from_str(&fs::read_to_string(out.join("one_minus_beta2.json")).unwrap()).unwrap();
    assert_eq!(sidecar["seed_source"], "config");
    assert_eq!(sidecar["config"]["runs"], 2);

    let fit = adaconv(&["regress", "--in", &csv.display().to_string()], &[]);
    assert!(fit.status.success());
    let fit: Value = serde_json::from_slice(&fit.stdout).unwrap();
    assert!(fit["slope"].as_f64().unwrap().is_finite());
    assert_eq!(fit["points"], 3);
}

#[test]
fn seed_override_is_recorded_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "sweep.json", SMALL_SWEEP);
    let sweep_into = |sub: &str, args: &[&str], env: &[(&str, &str)]| {
        let out = dir.path().join(sub);
        let out_s = out.display().to_string();
        let mut full = vec!["sweep", "--config", cfg.as_str(), "--out", out_s.as_str()];
        full.extend_from_slice(args);
        assert!(adaconv(&full, env).status.success());
        let json: Value = serde_json::from_str(&fs::read_to_string(out.join("one_minus_beta2.json")).unwrap()).unwrap();
        (fs::read(out.join("one_minus_beta2.csv")).unwrap(), json)
    };
    let (env_csv, env_json) = sweep_into("env", &[], &[("ADACONV_SEED", "99")]);
    let (cli_csv, cli_json) = sweep_into("cli", &["--seed", "99", "--jobs", "1"], &[]);
    let (default_csv, _) = sweep_into("default", &[], &[]);
    assert_eq!(env_json["seed_source"], "environment");
    assert_eq!(cli_json["seed_source"], "command_line");
    assert_eq!(env_json["config"]["master_seed"], 99);
    assert_eq!(env_csv, cli_csv);
    assert_ne!(env_csv, default_csv);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let zero = write(dir.path(), "zero.json", r#"{"vary": "alpha", "grid": [0.0, 1.0]}"#);
    let unknown = write(dir.path(), "unknown.json", r#"{"vary": "alpha", "colour": 3}"#);
    for cfg in [zero.as_str(), unknown.as_str(), "/nonexistent/sweep.json"] {
        let run = adaconv(&["sweep", "--config", cfg, "--out", &dir.path().display().to_string()], &[]);
        assert_eq!(run.status.code(), Some(2), "{cfg}: {}", String::from_utf8_lossy(&run.stderr));
    }
    let stderr = String::from_utf8_lossy(&adaconv(&["sweep", "--config", &zero], &[]).stderr).into_owned();
    assert!(stderr.contains("grid"), "{stderr}");
}

#[test]
fn verify_bounds_on_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bounds.json",
        r#"{
            "objective": {"atoms": [
                {"prob": 0.5, "terms": [[{"weight": 1.0, "center": 1.0}]]},
                {"prob": 0.5, "terms": [[{"weight": 1.0, "center": -1.0}]]}
            ]},
            "x0": [2.0],
            "N": 6,
            "alpha": [0.01, 0.1],
            "beta1": [0.0, 0.5],
            "beta2": [0.99, 1.0]
        }"#,
    );
    let run = adaconv(&["verify", "bounds", "--config", &cfg], &[]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let report: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(report["tally"]["violations"], 0);
    assert!(report["tally"]["instances"].as_u64().unwrap() > 0);
}

#[test]
fn verify_lemmas_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("lemmas.json");
    let run = adaconv(&["verify", "lemmas", "--out", &out.display().to_string()], &[]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["all_hold"], true);
    let sum_ratio = report["checks"].as_array().unwrap().iter().find(|c| c["check"] == "sum_ratio").unwrap();
    assert_eq!(sum_ratio["instances"], 10_000);
}

#[test]
fn bounds_eval_reports_every_theorem() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "inputs.json",
        r#"{"d": 1, "R": 2.0, "L": 1.0, "f0_minus_fstar": 1.0, "epsilon": 1e-8, "N": 10000, "alpha": 0.01, "beta1": 0.9, "beta2": 0.999, "sigma": 0.5}"#,
    );
    let run = adaconv(&["bounds", "eval", "--in", &input], &[]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let out: Value = serde_json::from_slice(&run.stdout).unwrap();
    assert!(out["thm4"]["total"].as_f64().unwrap() > 0.0);
    assert!((out["sgd"]["total"].as_f64().unwrap() - 4.042_137_924_131_72).abs() < 1e-9);
    let bad = write(dir.path(), "bad.json", r#"{"d": 1}"#);
    assert_eq!(adaconv(&["bounds", "eval", "--in", &bad], &[]).status.code(), Some(2));
}
