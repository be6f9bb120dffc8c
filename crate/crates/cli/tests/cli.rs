use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str], dir: &Path, config: &str) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_rwrs-lab"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .env_remove("RWRS_LAB_THREADS")
        .output()
        .unwrap()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/summary.json")).unwrap()).unwrap()
}

#[test]
fn slln_with_degenerate_scenery_has_zero_centered_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        &["slln"],
        dir.path(),
        r#"{"walk": "rademacher", "scenery": "degenerate", "n_grid": [10, 100], "replicas": 5,
            "rules": [{"rule": "centered_all_zero"}]}"#,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out/rows.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,replica,Z,Z_centered,Z_norm,alpha0,sumN2,max_abs_S,window_ok,lil_ok"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[3], "0");
        assert_eq!(cols[2].parse::<f64>().unwrap(), (cols[0].parse::<f64>().unwrap() + 1.0));
    }
    assert!(!csv.contains('\r'));
    assert_eq!(summary(dir.path())["passed"], true);
}

#[test]
fn synthetic_scaling_fixtures_give_exact_slopes() {
    for (cmd, exponent) in [("scaling-alpha", 1.5), ("scaling-occupancy", 1.25)] {
        let dir = tempfile::tempdir().unwrap();
        let points: Vec<(f64, f64)> = (4..12).map(|k| {
            let n = (1u64 << k) as f64;
            (n, 2.0 * n.powf(exponent))
        }).collect();
        let config = serde_json::json!({
            "walk": "rademacher", "scenery": "iid_gaussian", "n_grid": [16],
            "synthetic_points": points,
            "rules": [{"rule": "slope_range", "slope": "mean", "min": exponent - 1e-12, "max": exponent + 1e-12}],
        });
        let out = lab(&[cmd], dir.path(), &config.to_string());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
        let slope = summary(dir.path())["slopes"][0]["slope"].as_f64().unwrap();
        assert!((slope - exponent).abs() < 1e-12, "{slope}");
    }
}

#[test]
fn repeated_runs_and_manifest_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"walk": "fgn", "scenery": "ma_periodic", "n_grid": [64, 256], "replicas": 16, "seed": 42}"#;
    assert_eq!(lab(&["slln"], dir.path(), config).status.code(), Some(0));
    let first = fs::read(dir.path().join("out/rows.csv")).unwrap();
    assert_eq!(lab(&["slln"], dir.path(), config).status.code(), Some(0));
    assert_eq!(fs::read(dir.path().join("out/rows.csv")).unwrap(), first);

    let manifest_text = fs::read_to_string(dir.path().join("out/manifest.json")).unwrap();
    let manifest: Value = serde_json::from_str(&manifest_text).unwrap();
    assert_eq!(manifest["base_seed"], 42);
    assert_eq!(manifest["subcommand"], "slln");
    assert!(manifest["finished"].is_string());
    let rerun = tempfile::tempdir().unwrap();
    assert_eq!(lab(&["slln"], rerun.path(), &manifest_text).status.code(), Some(0));
    assert_eq!(fs::read(rerun.path().join("out/rows.csv")).unwrap(), first);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"walk": "rademacher", "scenery": "iid_gaussian", "n_grid": [64], "replicas": 4, "seed": 1}"#;
    lab(&["slln"], dir.path(), config);
    let base = fs::read(dir.path().join("out/rows.csv")).unwrap();
    let out = lab(&["slln", "--seed", "2"], dir.path(), config);
    assert_eq!(out.status.code(), Some(0));
    assert_ne!(fs::read(dir.path().join("out/rows.csv")).unwrap(), base);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["resolved_config"]["seed"], 2);
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"walk": "rademacher", "scenery": "iid_gaussian", "n_grid": [128], "replicas": 9, "seed": 3}"#;
    lab(&["slln"], dir.path(), config);
    let base = fs::read(dir.path().join("out/rows.csv")).unwrap();
    let path = dir.path().join("config.json");
    let out = Command::new(env!("CARGO_BIN_EXE_rwrs-lab"))
        .args(["slln", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("env"))
        .env("RWRS_LAB_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read(dir.path().join("env/rows.csv")).unwrap(), base);
}

#[test]
fn failing_rules_exit_one_with_failure_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        &["scaling-alpha"],
        dir.path(),
        r#"{"walk": "rademacher", "scenery": "iid_gaussian", "n_grid": [16, 64], "replicas": 8,
            "rules": [{"rule": "slope_range", "slope": "mean", "max": 0.5}, {"rule": "decay_ratio_near", "tolerance": 1}]}"#,
    );
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);
    let failures = report["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 2);
    assert_eq!(failures[0]["rule"], "slope_range");
    assert!(failures[1]["detail"].as_str().unwrap().contains("not applicable"));
    assert_eq!(summary(dir.path())["failures"].as_array().unwrap().len(), 2);
}

#[test]
fn warnings_do_not_change_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        &["theorem3"],
        dir.path(),
        r#"{"walk": "rademacher", "scenery": "pareto", "n_grid": [64, 256], "replicas": 8,
            "mode": "theorem3", "tau": 0.7, "expect_divergent": true}"#,
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(dir.path())["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn configuration_errors_exit_two_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        &["slln"],
        dir.path(),
        r#"{"walk": "rademacher", "scenery": "iid_gaussian", "n_grid": [16], "lambda": 0.9}"#,
    );
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(err["error"], "config");
    assert_eq!(err["path"], "lambda");
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda > 1"));

    let out = lab(
        &["slln"],
        dir.path(),
        r#"{"walk": "rademacher", "scenery": "pareto", "n_grid": [16], "mode": "theorem3"}"#,
    );
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(err["path"], "mode");

    let out = lab(&["theorem3"], dir.path(), r#"{"walk": "rademacher", "scenery": "ma_periodic", "n_grid": [16]}"#);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn covbound_reports_covariance_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        &["covbound"],
        dir.path(),
        r#"{"walk": "rademacher", "scenery": "ma_periodic", "n_grid": [16], "lags": [1, 2, 3], "samples": 10000,
            "rules": [{"rule": "covariance_within_bound"}]}"#,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = summary(dir.path())["report"]["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["lag"], 1);
    let csv = fs::read_to_string(dir.path().join("out/rows.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn varbound_and_subseq_write_rows_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(
        &["varbound"],
        dir.path(),
        r#"{"walk": "rademacher", "scenery": "iid_gaussian", "n_grid": [64, 256], "replicas": 50,
            "rules": [{"rule": "variance_ratio_within"}]}"#,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(summary(dir.path())["report"]["levels"].as_array().unwrap().len(), 2);

    let out = lab(
        &["subseq"],
        dir.path(),
        r#"{"walk": "rademacher", "scenery": "degenerate", "n_grid": [1000], "replicas": 4, "lambda": 2}"#,
    );
    assert_eq!(out.status.code(), Some(0));
    let terms = summary(dir.path())["report"]["terms"].as_array().unwrap().clone();
    assert_eq!(terms[2]["k"], 8);
    assert!(terms.iter().all(|t| t["summand"] == 0.0));
}
