use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fracevo(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracevo")).args(args).arg("--out-dir").arg(out).output().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn mittag_leffler_at_one_is_e() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracevo(&["mittag-leffler", "--beta", "1", "--z", "1"], dir.path());
    assert!(o.status.success());
    let v: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    approx::assert_relative_eq!(v, std::f64::consts::E, max_relative = 1e-12);
    let csv = std::fs::read_to_string(dir.path().join("mittag_leffler.csv")).unwrap();
    assert!(csv.starts_with("beta,z,value,terms,remainder\n"));
}

#[test]
fn exit_time_manifest_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracevo(&["exit-time", "--beta", "0.5", "--t", "1", "--n", "20000", "--seed", "7", "--workers", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["command"], "exit-time");
    assert_eq!(m["config"]["mc"]["seed"], 7);
    assert_eq!(m["workers"], 2);
    assert_eq!(m["outputs"][0], "exit_time.csv");
    assert_eq!(m["summary"]["within_allowance"], true);
    let rows = std::fs::read_to_string(dir.path().join("exit_time.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["solve-linear", "--m", "4", "--n", "9000", "--seed", "2", "--chunk-size", "1000"];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(fracevo(&[&args[..], &["--workers", "1"]].concat(), &a).status.success());
    assert!(fracevo(&[&args[..], &["--workers", "3"]].concat(), &b).status.success());
    assert_eq!(std::fs::read(a.join("solution.csv")).unwrap(), std::fs::read(b.join("solution.csv")).unwrap());
}

#[test]
fn config_file_overrides_flags_and_rerun_matches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"kernel": {"spec": {"family": "tempered", "beta": 0.5, "lambda": 2.0}}, "mc": {"n": 3000, "seed": 12}, "m": 4}"#,
    )
    .unwrap();
    let first = dir.path().join("first");
    let o = fracevo(&["solve-nonlinear", "--n", "99", "--reaction", "tanh:0.5", "--config", cfg.to_str().unwrap()], &first);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&first);
    assert_eq!(m["config"]["mc"]["n"], 3000);
    assert_eq!(m["config"]["reaction"], "tanh:0.5");
    assert_eq!(m["config"]["kernel"]["spec"]["lambda"], 2.0);

    let second = dir.path().join("second");
    let o = Command::new(env!("CARGO_BIN_EXE_fracevo"))
        .args(["rerun", first.join("manifest.json").to_str().unwrap(), "--out-dir", second.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success());
    for f in ["solution.csv", "iterations.csv"] {
        assert_eq!(std::fs::read(first.join(f)).unwrap(), std::fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn errors_exit_nonzero_with_category() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracevo(&["exit-time", "--t", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"mc\": {\"n\": -4}}").unwrap();
    let o = fracevo(&["exit-time", "--seed", "1", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mc.n"));

    let o = fracevo(&["exit-time", "--seed", "1", "--beta", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[domain]"));

    let o = fracevo(&["mittag-leffler", "--beta", "0.5", "--z=-80"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[range]"));
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fracevo"))
        .args(["mittag-leffler", "--z", "0.5"])
        .env("FRACEVO_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn validate_reports_witness() {
    let dir = tempfile::tempdir().unwrap();
    let o = fracevo(&["validate", "--n", "20000", "--seed", "3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("power-law witness: ν ≥"));
    assert!(!text.contains("FAIL"));
    assert_eq!(manifest(dir.path())["summary"]["failed"], 0);
}
