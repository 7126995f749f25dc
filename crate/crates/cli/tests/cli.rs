use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyclescope")).args(args).env("CYCLESCOPE_SEED", "11").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn nonconstant(report: &Value) -> Vec<f64> {
    report["cycles"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["kind"] == "non-constant")
        .map(|c| c["x0"].as_f64().unwrap())
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const ANNULUS: &str = r#"{"period": 2.0, "breakpoints": [0.0, 1.0, 2.0],
  "pieces": [{"num": [0.0, 1.0, -1.0], "den": [1.0]}, {"num": [0.0, -1.0, 1.0], "den": [1.0]}],
  "state_interval": ["-inf", "inf"]}"#;

#[test]
fn harvesting_preset_has_two_cycles() {
    let out = run(&["analyze", "--preset", "harvesting", "--param", "h=0.1"]);
    assert_eq!(code(&out), 0);
    let r = json(&out);
    assert_eq!(nonconstant(&r).len(), 2);
    assert!((r["thresholds"]["h_star"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!(r["verification"]["max_disagreement"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn abel_sharpness_preset_has_three_constant_cycles() {
    let r = json(&run(&["analyze", "--preset", "abel"]));
    let cycles = r["cycles"].as_array().unwrap();
    assert_eq!(cycles.len(), 3);
    assert!(cycles.iter().all(|c| c["kind"] == "constant" && c["multiplicity"] == 1));
}

#[test]
fn annulus_model_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "annulus.json", ANNULUS);
    let out = run(&["analyze", &f]);
    assert_eq!(code(&out), 0);
    let r = json(&out);
    assert_eq!(r["annulus"], true);
    assert!(r["cycles"].as_array().unwrap().is_empty());
    let v = json(&run(&["verify", &f, "--samples", "20"]));
    assert!(v["max_multiplier_offset"].as_f64().unwrap() < 1e-9);
}

#[test]
fn model_output_round_trips_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("m.json");
    let f = f.to_str().unwrap();
    assert_eq!(code(&run(&["model", "--preset", "mosquito-long", "--out", f])), 0);
    let r = json(&run(&["analyze", f]));
    assert_eq!(nonconstant(&r).len(), 2);
    assert_eq!(r["thresholds"]["regime"]["verdict"], "exact two NC cycles + E0 LAS");
    let text = std::fs::read_to_string(f).unwrap();
    let model: cyclescope::equation::ModelFile =
        serde_json::from_value(serde_json::from_str::<Value>(&text).unwrap()["model"].clone()).unwrap();
    let again = serde_json::to_string(&model).unwrap();
    let back: cyclescope::equation::ModelFile = serde_json::from_str(&again).unwrap();
    assert_eq!(back, model);
}

#[test]
fn reports_are_deterministic() {
    let a = run(&["analyze", "--preset", "mosquito-short", "--param", "c=0.09", "--param", "T=0.8"]);
    let b = run(&["analyze", "--preset", "mosquito-short", "--param", "c=0.09", "--param", "T=0.8"]);
    assert_eq!(a.stdout, b.stdout);
    let a = run(&["sweep", "--preset", "harvesting", "--from", "0.1", "--to", "0.5", "--steps", "9", "--jobs", "1"]);
    let b = run(&["sweep", "--preset", "harvesting", "--from", "0.1", "--to", "0.5", "--steps", "9", "--jobs", "3"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn harvesting_sweep_has_one_transition_at_the_fold() {
    let out = run(&["sweep", "--preset", "harvesting", "--from", "0.05", "--to", "0.6", "--steps", "56"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<(f64, u32)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 56);
    let changes: Vec<usize> = (1..rows.len()).filter(|&i| rows[i].1 != rows[i - 1].1).collect();
    assert_eq!(changes.len(), 1);
    let i = changes[0];
    assert_eq!((rows[i - 1].1, rows[i].1), (2, 0));
    assert!(rows[i - 1].0 < 0.490000571270 && 0.490000571270 < rows[i].0);
}

#[test]
fn zero_length_sweep_is_one_row() {
    let out = run(&["sweep", "--preset", "harvesting", "--from", "0.2", "--to", "0.2", "--steps", "7"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
}

#[test]
fn failed_sweep_rows_are_marked() {
    let out = run(&["sweep", "--preset", "mosquito-short", "--parameter", "T", "--from", "0.45", "--to", "0.55", "--steps", "3"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert!(rows[1].contains("failed"), "{text}");
    assert!(rows[0].contains(",ok,") && rows[2].contains(",ok,"));
}

#[test]
fn threshold_matches_reference() {
    let r = json(&run(&["threshold", "--preset", "harvesting", "--grid", "256"]));
    let alpha = r["threshold"]["alpha"].as_f64().unwrap();
    assert!((alpha - 0.490000571270).abs() < 1e-7, "{alpha}");
}

#[test]
fn branch_reaches_the_fold() {
    let r = json(&run(&["branch", "--preset", "harvesting", "--x0", "0.9", "--to", "0.6", "--steps", "10"]));
    assert_eq!(r["branch"]["termination"], "merged");
}

#[test]
fn poincare_reports_jet() {
    let r = json(&run(&["poincare", "--preset", "harvesting", "--x0", "0.5"]));
    assert!((r["jet"]["value"].as_f64().unwrap() - 0.8065033133928815).abs() < 1e-10);
    assert_eq!(r["knots"]["in_v"], true);
}

#[test]
fn verify_passes_on_harvesting_and_reports_escapes() {
    let out = run(&["verify", "--preset", "harvesting", "--samples", "100"]);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["max_disagreement"].as_f64().unwrap() <= 1e-6);
    let out = run(&[
        "verify", "--preset", "abel", "--param", "a1=3", "--param", "a2=3", "--param", "b1=0", "--param", "b2=0",
        "--param", "c1=0", "--param", "c2=0", "--samples", "50",
    ]);
    let v = json(&out);
    assert!(v["escaped_fraction"].as_f64().unwrap() > 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"period": 2.0, "breakpoints": [0.0, 1.0], "pieces": []}"#);
    let out = run(&["analyze", &bad]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("state_interval") && err.contains("line 1"), "{err}");
    assert_eq!(code(&run(&["model", "--preset", "harvesting", "--param", "nope=1"])), 2);
    assert_eq!(code(&run(&["model", "--preset", "mosquito-short", "--param", "T=0.5"])), 2);
    assert_eq!(code(&run(&["analyze", "--preset", "harvesting", "--param", "h=0.1", "--grid", "8"])), 2);
    assert_eq!(code(&run(&["verify", "--preset", "harvesting", "--samples", "20", "--tol", "1e-30"])), 3);
    let escape = write(
        dir.path(),
        "escape.json",
        r#"{"period": 1.0, "breakpoints": [0.0, 0.5, 1.0],
          "pieces": [{"num": [50.0, 0.0, 0.0, 1.0], "den": [1.0]}, {"num": [50.0, 0.0, 0.0, 1.0], "den": [1.0]}],
          "state_interval": [0.0, "inf"]}"#,
    );
    assert_eq!(code(&run(&["verify", &escape, "--samples", "10"])), 4);
}
