use std::path::Path;
use std::process::{Command, Output};

use dat_core::output::parse_key_values;

fn dat(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dat"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn bundled(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .display()
        .to_string()
}

fn value(kv: &[(String, String)], key: &str) -> String {
    kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.clone()).unwrap()
}

#[test]
fn analyze_prints_report_without_simulating() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dat(&["analyze", "--config", &bundled("paper_sec6.cfg")], tmp.path());
    assert!(out.status.success());
    let kv = parse_key_values(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(value(&kv, "valid"), "true");
    assert_eq!(value(&kv, "d_max"), "1");
    let lambda2: f64 = value(&kv, "lambda2").parse().unwrap();
    assert!((lambda2 - (2.0 - 2f64.sqrt()) / 2.0).abs() < 1e-12);
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn run_applies_overrides_and_writes_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dat(
        &["run", "--config", &bundled("ring6.cfg"), "--seed", "5", "--runs", "3", "--out", "res", "--mode", "naive"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("res");
    for f in ["trajectories.csv", "error.csv", "agent_error.csv", "analysis.txt", "summary.txt", "scenario.cfg", "overlay.gp"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let summary = parse_key_values(&std::fs::read_to_string(dir.join("summary.txt")).unwrap());
    assert_eq!(value(&summary, "runs"), "3");
    assert_eq!(value(&summary, "seed"), "5");
    assert_eq!(value(&summary, "mode"), "naive");
    let errors = std::fs::read_to_string(dir.join("error.csv")).unwrap();
    assert_eq!(errors.lines().count(), 1 + 1001);
}

#[test]
fn invalid_gains_run_but_are_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("hot.cfg");
    let text = dat_core::scenario::PAPER_SEC6
        .replace("epsilon = 1/8", "epsilon = 0.6")
        .replace("runs = 200", "runs = 2")
        .replace("horizon = 2000", "horizon = 20");
    std::fs::write(&cfg, text).unwrap();
    let out = dat(&["run", "--config", cfg.to_str().unwrap(), "--out", "o"], tmp.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
    let analysis = parse_key_values(&std::fs::read_to_string(tmp.path().join("o/analysis.txt")).unwrap());
    assert_eq!(value(&analysis, "valid"), "false");
}

#[test]
fn errors_exit_nonzero_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty.cfg");
    std::fs::write(&empty, "").unwrap();
    let certain = tmp.path().join("certain.cfg");
    std::fs::write(&certain, dat_core::scenario::PAPER_SEC6.replace("drop_probability = 0.5", "drop_probability = 1.0")).unwrap();
    for args in [
        vec!["analyze", "--config", "missing.cfg"],
        vec!["analyze", "--config", empty.to_str().unwrap()],
        vec!["run", "--config", certain.to_str().unwrap()],
        vec!["run", "--config", empty.to_str().unwrap(), "--mode", "sideways"],
        vec!["frobnicate"],
    ] {
        let out = dat(&args, tmp.path());
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = dat(&["analyze", "--config", empty.to_str().unwrap()], tmp.path());
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
}

#[test]
fn disconnected_graph_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("split.cfg");
    std::fs::write(&cfg, dat_core::scenario::PAPER_SEC6.replace("1-2, 2-3, 3-4", "1-2, 3-4")).unwrap();
    let out = dat(&["analyze", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("disconnected"));
}
