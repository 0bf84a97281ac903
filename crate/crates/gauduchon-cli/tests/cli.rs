use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gauduchon"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is a single JSON document")
}

fn write_flat_metric(path: &Path, points: usize) {
    let spec = serde_json::json!({
        "n": 3,
        "sizes": [1, 1, 1, 1, points, 1],
        "entries": { "(1,1)": "1", "(2,2)": "1", "(3,3)": "1" }
    });
    fs::write(path, spec.to_string()).unwrap();
}

fn write_torus_metric(path: &Path, points: usize) {
    let spec = serde_json::json!({
        "n": 3,
        "sizes": [1, 1, 1, 1, points, 1],
        "entries": {
            "(1,1)": "1 + 0.8660254*sin(x3)",
            "(2,2)": "1 + 0.25*cos(x3)",
            "(3,3)": "1"
        }
    });
    fs::write(path, spec.to_string()).unwrap();
}

#[test]
fn gamma_on_flat_metric_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let metric = dir.path().join("flat.json");
    write_flat_metric(&metric, 8);
    let out = run(&["gamma", "--metric", metric.to_str().unwrap(), "--k", "1"]);
    let doc = stdout_json(&out);
    assert!(doc["gamma"].as_f64().unwrap().abs() <= 1e-10);
    assert!(doc["gamma_spread"].as_f64().unwrap() <= 1e-9);
    assert!(doc.get("v").is_none());
}

#[test]
fn gamma_can_include_solution() {
    let dir = tempfile::tempdir().unwrap();
    let metric = dir.path().join("flat.json");
    write_flat_metric(&metric, 8);
    let out = run(&[
        "gamma",
        "--metric",
        metric.to_str().unwrap(),
        "--k",
        "1",
        "--include-solution",
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["v"]["sizes"][4].as_u64(), Some(8));
}

#[test]
fn classify_torus_metric_is_not_kahler() {
    let dir = tempfile::tempdir().unwrap();
    let metric = dir.path().join("torus.json");
    write_torus_metric(&metric, 32);
    let out = run(&["classify", "--metric", metric.to_str().unwrap(), "--tol", "1e-10"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["is_kahler"].as_bool(), Some(false));
    assert!(doc["kahler_residual"].as_f64().unwrap() > 1e-3);
}

#[test]
fn reproduce_iwasawa_row() {
    let out = run(&["reproduce", "--example", "iwasawa"]);
    let doc = stdout_json(&out);
    assert_eq!(doc["example"].as_str(), Some("iwasawa"));
    assert!((doc["gamma"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-15);
    assert_eq!(doc["sign_expected"].as_str(), Some("+"));
    assert_eq!(doc["sign_observed"].as_str(), Some("+"));
}

#[test]
fn reproduce_s5s1_row_flags_discrepancy() {
    let out = run(&["reproduce", "--example", "s5s1"]);
    let doc = stdout_json(&out);
    assert!((doc["gamma"].as_f64().unwrap() + 1.0 / 12.0).abs() < 1e-15);
    assert_eq!(doc["sign_expected"].as_str(), Some("-"));
    assert_eq!(doc["sign_observed"].as_str(), Some("-"));
    assert!(doc["notes"].as_str().unwrap().contains("convention"));
}

#[test]
fn reproduce_unknown_example_exits_2() {
    let out = run(&["reproduce", "--example", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown example"));
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_variable_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let metric = dir.path().join("bad.json");
    let spec = serde_json::json!({
        "n": 3,
        "sizes": [1, 1, 1, 1, 8, 1],
        "entries": { "(1,1)": "sin(x7)", "(2,2)": "1", "(3,3)": "1" }
    });
    fs::write(&metric, spec.to_string()).unwrap();
    let out = run(&["gamma", "--metric", metric.to_str().unwrap(), "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown variable x7"), "stderr: {err}");
    assert!(err.contains("byte 4"), "stderr: {err}");
}

#[test]
fn find_gauduchon_without_bracket_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let m1 = dir.path().join("m1.json");
    let m2 = dir.path().join("m2.json");
    write_flat_metric(&m1, 8);
    write_flat_metric(&m2, 8);
    let out = run(&[
        "find-gauduchon",
        "--metric1",
        m1.to_str().unwrap(),
        "--metric2",
        m2.to_str().unwrap(),
        "--k",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bracket"));
}

#[test]
fn conformal_check_constant_shift() {
    let dir = tempfile::tempdir().unwrap();
    let metric = dir.path().join("torus.json");
    write_torus_metric(&metric, 32);
    let out = run(&[
        "conformal-check",
        "--metric",
        metric.to_str().unwrap(),
        "--rho",
        "0.7",
        "--k",
        "1",
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["sandwich_ok"].as_bool(), Some(true));
    assert_eq!(doc["sign_ok"].as_bool(), Some(true));
    assert_eq!(doc["rho_min"].as_f64(), Some(0.7));
}

#[test]
fn semilinear_solves_with_expression_rhs() {
    let dir = tempfile::tempdir().unwrap();
    let metric = dir.path().join("flat.json");
    write_flat_metric(&metric, 16);
    let b = dir.path().join("b.json");
    fs::write(&b, serde_json::json!({ "holo": ["0", "0", "0"] }).to_string()).unwrap();
    let out = run(&[
        "semilinear",
        "--metric",
        metric.to_str().unwrap(),
        "--B",
        b.to_str().unwrap(),
        "--f",
        "0.01*sin(x3)",
    ]);
    let doc = stdout_json(&out);
    assert!(doc["gamma"].is_null());
    let c = doc["c"].as_f64().unwrap();
    let (lo, hi) = (doc["c_bounds"][0].as_f64().unwrap(), doc["c_bounds"][1].as_f64().unwrap());
    assert!(lo - 1e-12 <= c && c <= hi + 1e-12);
}

#[test]
fn semilinear_accepts_psi_table() {
    let dir = tempfile::tempdir().unwrap();
    let metric = dir.path().join("flat.json");
    write_flat_metric(&metric, 16);
    let b = dir.path().join("b.json");
    fs::write(&b, serde_json::json!({ "holo": ["0", "0", "0"] }).to_string()).unwrap();
    let table = dir.path().join("psi.json");
    // the identity as a two-knot table: matches --psi linear
    fs::write(&table, serde_json::json!({ "t": [-100.0, 100.0], "value": [-100.0, 100.0] }).to_string()).unwrap();
    let base = run(&[
        "semilinear",
        "--metric",
        metric.to_str().unwrap(),
        "--B",
        b.to_str().unwrap(),
        "--f",
        "0.01*sin(x3)",
    ]);
    let tabled = run(&[
        "semilinear",
        "--metric",
        metric.to_str().unwrap(),
        "--B",
        b.to_str().unwrap(),
        "--f",
        "0.01*sin(x3)",
        "--psi",
        table.to_str().unwrap(),
    ]);
    let (a, b) = (stdout_json(&base), stdout_json(&tabled));
    assert!((a["c"].as_f64().unwrap() - b["c"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn reports_are_deterministic_apart_from_seconds() {
    let dir = tempfile::tempdir().unwrap();
    let metric = dir.path().join("torus.json");
    write_torus_metric(&metric, 32);
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("seconds");
        v
    };
    let a = strip(stdout_json(&run(&["reproduce", "--example", "torus-positive-gamma1"])));
    let b = strip(stdout_json(&run(&["reproduce", "--example", "torus-positive-gamma1"])));
    assert_eq!(a, b);
}
