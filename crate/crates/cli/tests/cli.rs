use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stable-wavelet"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn synth_rows_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run(d.path(), &["synth", "--n", "512", "--seed", "9", "--alpha", "1.4", "--hurst", "0.6"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let x = std::fs::read_to_string(a.path().join("path.csv")).unwrap();
    let y = std::fs::read_to_string(b.path().join("path.csv")).unwrap();
    assert_eq!(x.lines().count(), 514);
    assert_eq!(x, y);
    let side = read_json(&a.path().join("path.json"));
    assert_eq!(side["seed"], 9);
    assert_eq!(side["config"]["alpha"], 1.4);
    assert!(side["version"].is_string());
}

#[test]
fn threads_do_not_change_results() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(a.path(), &["--threads", "1", "dwt", "--n", "256", "--j-max", "3"])), 0);
    assert_eq!(code(&run(b.path(), &["--threads", "4", "dwt", "--n", "256", "--j-max", "3"])), 0);
    let x = std::fs::read_to_string(a.path().join("grid.csv")).unwrap();
    let y = std::fs::read_to_string(b.path().join("grid.csv")).unwrap();
    assert_eq!(x, y);
}

#[test]
fn invalid_hurst_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(d.path(), &["synth", "--hurst", "1.2"])), 2);
}

#[test]
fn missing_input_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["dwt", "--mode", "pyramidal", "--input", "does-not-exist.csv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn synth_dwt_estimate_pipeline() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(d.path(), &["synth", "--n", "2048"])), 0);
    let path = d.path().join("path.csv");
    let o = run(d.path(), &["dwt", "--mode", "pyramidal", "--input", path.to_str().unwrap(), "--j-max", "4"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let grid = d.path().join("grid.csv");
    assert!(read_json(&d.path().join("grid.json"))["meta"]["counts"].is_array());
    let o = run(d.path(), &["estimate", "--input", grid.to_str().unwrap(), "--plugin"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let est = read_json(&d.path().join("estimate.json"));
    assert!(est["result"]["H_hat"].as_f64().unwrap().is_finite());
    assert!(est["result"]["sigma2_hat"].as_f64().is_some());
}

#[test]
fn power_estimator_rejects_beta_out_of_range() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(d.path(), &["dwt", "--n", "256", "--j-max", "3"])), 0);
    let grid = d.path().join("grid.csv");
    let o = run(
        d.path(),
        &["estimate", "--input", grid.to_str().unwrap(), "--method", "power", "--beta", "0.9", "--alpha", "1.6"],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_and_flag_precedence() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"synth": {"n": 300, "alpha": 1.2}}"#).unwrap();
    let o = run(d.path(), &["--config", cfg.to_str().unwrap(), "synth", "--alpha", "1.7"]);
    assert_eq!(code(&o), 0);
    let side = read_json(&d.path().join("path.json"));
    assert_eq!(side["config"]["n"], 300);
    assert_eq!(side["config"]["alpha"], 1.7);
}

#[test]
fn selfcheck_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["selfcheck"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn iid_clt_preset_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["clt", "--preset", "iid-bounded"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let rep = read_json(&d.path().join("clt_report.json"));
    assert_eq!(rep["report"]["verdicts"][0]["name"], "normality");
    let samples = std::fs::read_to_string(d.path().join("clt_samples.csv")).unwrap();
    assert!(samples.starts_with("config_id,replicate,N,statistic,value"));
}

#[test]
fn covariance_bound_reports_slope() {
    let d = tempfile::tempdir().unwrap();
    let o = run(d.path(), &["bounds", "--preset", "thm22-default"]);
    assert!(matches!(code(&o), 0 | 1));
    let rep = read_json(&d.path().join("bounds_report.json"));
    let verdicts = rep["report"]["verdicts"].as_array().unwrap();
    assert!(verdicts.iter().any(|v| v["name"] == "slope"));
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(d.path(), &["clt", "--preset", "nope"])), 2);
    assert_eq!(code(&run(d.path(), &["bounds", "--preset", "nope"])), 2);
}
