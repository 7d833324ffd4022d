use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fraccontrol"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn constants_emit_a_passing_table() {
    let out = run(&["constants", "--alpha-list", "1.5,2", "--s-list", "0.75"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,parameter,closed_form,quadrature,abs_err,tol,pass"));
    assert!(lines.clone().count() >= 10);
    assert!(lines.all(|l| l.ends_with(",true")));
}

#[test]
fn biorthogonality_csv_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("k.csv");
    let out = run(&[
        "verify-biorthogonal", "--s", "0.75", "--T", "0.3", "--model", "schrodinger", "--size", "4", "--trunc", "400",
        "--out", csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("n,k,error"));
    assert_eq!(text.lines().count(), 17);
}

#[test]
fn synthesize_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let u = dir.path().join("u.csv");
    let out = run(&[
        "synthesize", "--s", "0.75", "--T", "0.3", "--model", "schrodinger", "--y0", "modal:1", "--method", "gramian",
        "--n", "10", "--samples", "16385", "--out", u.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = json(&u.with_extension("json"));
    assert_eq!(manifest["method"], "gramian");
    assert_eq!(manifest["samples"], 16385);
    assert!(manifest["log_cost"].as_f64().unwrap().is_finite());

    let report = dir.path().join("r.json");
    let out = run(&[
        "simulate", "--control", u.to_str().unwrap(), "--s", "0.75", "--T", "0.3", "--model", "schrodinger",
        "--n-modes", "10", "--out", report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&report);
    assert!(r["residual_rel"].as_f64().unwrap() < 1e-4);
    assert_eq!(r["per_mode"].as_array().unwrap().len(), 10);

    // Horizon mismatch is a configuration error.
    let out = run(&[
        "simulate", "--control", u.to_str().unwrap(), "--s", "0.75", "--T", "0.4", "--model", "schrodinger",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn initial_state_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let y0 = dir.path().join("y0.json");
    std::fs::write(&y0, r#"{"n_modes": 2, "coeffs": [[1.0, 0.0], [0.0, 0.5]]}"#).unwrap();
    let u = dir.path().join("u.csv");
    let out = run(&[
        "synthesize", "--s", "0.75", "--T", "0.5", "--model", "heat", "--y0", y0.to_str().unwrap(), "--method",
        "gramian", "--n", "4", "--samples", "4097", "--out", u.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&u).unwrap();
    assert_eq!(text.lines().count(), 4098);
}

#[test]
fn malformed_inputs_fail_cleanly() {
    let out = run(&["synthesize", "--s", "0.75", "--T", "0.3", "--model", "heat", "--y0", "modal:x", "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad mode index"));
    let out = run(&["synthesize", "--s", "0.3", "--T", "0.3", "--model", "heat", "--y0", "modal:1", "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cost_sweep_writes_table_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(
        &cfg,
        r#"{"model": "schrodinger", "T_list": [0.6, 0.5, 0.4, 0.3], "N_policy": {"fixed": 6}}"#,
    )
    .unwrap();
    let base = dir.path().join("sweep_out");
    let out = run(&["cost-sweep", "--config", cfg.to_str().unwrap(), "--out", base.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(fit["tau_hat"].as_f64().is_some());
    let table = std::fs::read_to_string(base.with_extension("csv")).unwrap();
    assert!(table.starts_with("T,log_cost,"));
    assert_eq!(table.lines().count(), 5);
    let report = json(&base.with_extension("json"));
    assert_eq!(report["config"]["N_policy"]["fixed"], 6);
    assert_eq!(report["config"]["s"], 0.75);
}

#[test]
fn one_horizon_sweep_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(&cfg, r#"{"T_list": [0.3]}"#).unwrap();
    let out = run(&["cost-sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least 4"));
}

#[test]
fn audit_reports_all_pass() {
    let out = run(&["audit", "--sequential"]);
    assert!(out.status.success());
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["all_pass"], true);
    assert_eq!(r["products"].as_array().unwrap().len(), 4);
}
