//! End-to-end tests of the `adot` binary: file round-trips, exit
//! codes, and report determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn adot(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_adot"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn report(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad report: {e}\nstdout: {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

const MU: &str = r#"{"dimension": 1, "horizon": 2, "nodes": [
  {"id": "u", "t": 1, "value": [1.0], "prob": 0.5, "parent": null},
  {"id": "d", "t": 1, "value": [-1.0], "prob": 0.5, "parent": null},
  {"id": "uu", "t": 2, "value": [1.0], "prob": 1.0, "parent": "u"},
  {"id": "dd", "t": 2, "value": [-1.0], "prob": 1.0, "parent": "d"}
]}"#;

const NU: &str = r#"{"dimension": 1, "horizon": 2, "nodes": [
  {"id": "r", "t": 1, "value": [0.0], "prob": 1.0, "parent": null},
  {"id": "p", "t": 2, "value": [1.0], "prob": 0.5, "parent": "r"},
  {"id": "m", "t": 2, "value": [-1.0], "prob": 0.5, "parent": "r"}
]}"#;

const TERMINAL_DISTANCE: &str = r#"{"kind": "table", "entries": [
  {"paths": ["uu", "p"], "c": 0.0},
  {"paths": ["uu", "m"], "c": 2.0},
  {"paths": ["dd", "p"], "c": 2.0},
  {"paths": ["dd", "m"], "c": 0.0}
]}"#;

#[test]
fn solve_reports_gap_instance_values() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", MU);
    let nu = write(dir.path(), "nu.json", NU);
    let cost = write(dir.path(), "cost.json", TERMINAL_DISTANCE);
    for (mode, expected) in [("bicausal", 1.0), ("causal", 0.0)] {
        let out = adot(
            &[
                "solve",
                "--mode",
                mode,
                "--marginals",
                mu.to_str().unwrap(),
                nu.to_str().unwrap(),
                "--cost",
                cost.to_str().unwrap(),
            ],
            &[],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let rep = report(&out);
        let value = rep["values"]["value"].as_f64().unwrap();
        assert!((value - expected).abs() < 1e-8, "{mode}: value {value}");
        let gap = rep["diagnostics"]["duality_gap"].as_f64().unwrap();
        assert!(gap <= 1e-8, "{mode}: gap {gap}");
    }
}

#[test]
fn missing_cost_entry_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", MU);
    let nu = write(dir.path(), "nu.json", NU);
    let cost = write(
        dir.path(),
        "cost.json",
        r#"{"kind": "table", "entries": [{"paths": ["uu", "p"], "c": 0.0}]}"#,
    );
    let out = adot(
        &[
            "solve",
            "--mode",
            "bicausal",
            "--marginals",
            mu.to_str().unwrap(),
            nu.to_str().unwrap(),
            "--cost",
            cost.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing cost entry"), "stderr: {err}");
}

#[test]
fn reports_are_deterministic_modulo_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", MU);
    let nu = write(dir.path(), "nu.json", NU);
    let cost = write(dir.path(), "cost.json", TERMINAL_DISTANCE);
    let args = [
        "solve",
        "--mode",
        "bicausal",
        "--marginals",
        mu.to_str().unwrap(),
        nu.to_str().unwrap(),
        "--cost",
        cost.to_str().unwrap(),
        "--dual",
        "--coupling",
    ];
    let mut first = report(&adot(&args, &[]));
    let mut second = report(&adot(&args, &[]));
    first["diagnostics"]["wall_time_ms"] = 0.into();
    second["diagnostics"]["wall_time_ms"] = 0.into();
    assert_eq!(first, second);
}

#[test]
fn hedge_prices_separable_payoff_at_sum_of_means() {
    let dir = tempfile::tempdir().unwrap();
    let mart = write(
        dir.path(),
        "mart.json",
        r#"{"dimension": 1, "horizon": 2, "nodes": [
          {"id": "r", "t": 1, "value": [1.0], "prob": 1.0, "parent": null},
          {"id": "hi", "t": 2, "value": [2.0], "prob": 0.5, "parent": "r"},
          {"id": "lo", "t": 2, "value": [0.0], "prob": 0.5, "parent": "r"}
        ]}"#,
    );
    // ξ = f(x) + g(y) with f(hi)=4, f(lo)=0, g(hi)=2, g(lo)=0:
    // the price is E f + E g = 2 + 1 = 3 for any joint model
    let payoff = write(
        dir.path(),
        "payoff.json",
        r#"{"entries": [
          {"paths": ["hi", "hi"], "xi": 6.0},
          {"paths": ["hi", "lo"], "xi": 4.0},
          {"paths": ["lo", "hi"], "xi": 2.0},
          {"paths": ["lo", "lo"], "xi": 0.0}
        ]}"#,
    );
    let out = adot(
        &[
            "hedge",
            "--marginals",
            mart.to_str().unwrap(),
            mart.to_str().unwrap(),
            "--payoff",
            payoff.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out);
    let price = rep["values"]["price"].as_f64().unwrap();
    assert!((price - 3.0).abs() < 1e-8, "price {price}");
    let p0 = rep["payloads"]["strategy"]["p0"].as_f64().unwrap();
    assert!((p0 - price).abs() < 1e-7, "p0 {p0} vs price {price}");
}

#[test]
fn polar_empty_event_gets_trivial_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", MU);
    let nu = write(dir.path(), "nu.json", NU);
    let event = write(dir.path(), "event.json", r#"{"tuples": []}"#);
    let out = adot(
        &[
            "polar",
            "--mode",
            "bicausal",
            "--marginals",
            mu.to_str().unwrap(),
            nu.to_str().unwrap(),
            "--event",
            event.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success());
    let rep = report(&out);
    assert!(rep["values"]["max_mass"].as_f64().unwrap().abs() <= 1e-9);
    assert_eq!(rep["values"]["polar"].as_f64().unwrap(), 1.0);
    assert!(rep["payloads"]["certificate"].is_object());
}

#[test]
fn polar_nonpolar_event_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let mu = write(dir.path(), "mu.json", MU);
    let nu = write(dir.path(), "nu.json", NU);
    let event = write(dir.path(), "event.json", r#"{"tuples": [["uu", "p"]]}"#);
    let out = adot(
        &[
            "polar",
            "--mode",
            "bicausal",
            "--marginals",
            mu.to_str().unwrap(),
            nu.to_str().unwrap(),
            "--event",
            event.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    let rep = report(&out);
    assert!(rep["values"]["max_mass"].as_f64().unwrap() > 0.1);
    assert_eq!(rep["values"]["polar"].as_f64().unwrap(), 0.0);
}

#[test]
fn canonicalize_merges_duplicate_branches_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    // the two roots carry identical subtrees and should merge
    let dup = write(
        dir.path(),
        "dup.json",
        r#"{"dimension": 1, "horizon": 2, "nodes": [
          {"id": "a", "t": 1, "value": [0.0], "prob": 0.5, "parent": null},
          {"id": "b", "t": 1, "value": [0.0], "prob": 0.5, "parent": null},
          {"id": "a1", "t": 2, "value": [1.0], "prob": 1.0, "parent": "a"},
          {"id": "b1", "t": 2, "value": [1.0], "prob": 1.0, "parent": "b"}
        ]}"#,
    );
    let merged = dir.path().join("merged.json");
    let out = adot(
        &[
            "canonicalize",
            "--process",
            dup.to_str().unwrap(),
            "--out",
            merged.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out);
    assert!(rep["values"]["aw_to_original"].as_f64().unwrap().abs() <= 1e-8);
    assert_eq!(rep["values"]["node_count_before"].as_f64().unwrap(), 4.0);
    assert_eq!(rep["values"]["node_count_after"].as_f64().unwrap(), 2.0);
    // the merged file loads and validates
    let out = adot(&["validate", "--process", merged.to_str().unwrap()], &[]);
    assert!(out.status.success());
}

#[test]
fn barycenter_reports_value_and_weights() {
    let dir = tempfile::tempdir().unwrap();
    let d0 = write(
        dir.path(),
        "d0.json",
        r#"{"dimension": 1, "horizon": 1, "nodes": [
          {"id": "z", "t": 1, "value": [0.0], "prob": 1.0, "parent": null}]}"#,
    );
    let d2 = write(
        dir.path(),
        "d2.json",
        r#"{"dimension": 1, "horizon": 1, "nodes": [
          {"id": "w", "t": 1, "value": [2.0], "prob": 1.0, "parent": null}]}"#,
    );
    let cost = write(dir.path(), "l1.json", r#"{"kind": "lp_sum", "p": 1}"#);
    let cand = write(
        dir.path(),
        "cand.json",
        r#"{"paths": [
          {"id": "a0", "values": [[0.0]]},
          {"id": "a1", "values": [[1.0]]},
          {"id": "a2", "values": [[2.0]]}
        ]}"#,
    );
    let out = adot(
        &[
            "barycenter",
            "--marginals",
            d0.to_str().unwrap(),
            d2.to_str().unwrap(),
            "--costs",
            cost.to_str().unwrap(),
            cost.to_str().unwrap(),
            "--support",
            cand.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(&out);
    assert!((rep["values"]["value"].as_f64().unwrap() - 2.0).abs() < 1e-8);
    let nu = rep["payloads"]["nu"].as_object().unwrap();
    let total: f64 = nu.values().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-8);
}

#[test]
fn selftest_is_seed_reproducible() {
    let a = adot(&["selftest", "--count", "5"], &[("ADOT_SEED", "11")]);
    let b = adot(&["selftest", "--count", "5"], &[("ADOT_SEED", "11")]);
    assert!(a.status.success());
    let (mut ra, mut rb) = (report(&a), report(&b));
    ra["diagnostics"]["wall_time_ms"] = 0.into();
    rb["diagnostics"]["wall_time_ms"] = 0.into();
    assert_eq!(ra, rb);
}

#[test]
fn validate_flags_bad_coupling() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "mu.json", MU);
    write(dir.path(), "nu.json", NU);
    // anticomonotone matching is fine as a plain coupling but breaks
    // anticausality on the gap pair the other way around; here we make
    // the marginal law itself wrong (all mass on one tuple)
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"marginals": ["mu.json", "nu.json"],
            "mass": [{"paths": ["uu", "p"], "p": 1.0}]}"#,
    );
    let out = adot(
        &["validate", "--coupling", bad.to_str().unwrap(), "--mode", "plain"],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    let rep = report(&out);
    assert!(rep["values"]["worst_violation"].as_f64().unwrap() > 0.4);
}
