//! End-to-end runs of the `robex` binary: exit codes and structured output.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_robex");

fn robex(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("ROBEX_SOLVER")
        .output()
        .unwrap()
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut full = args.to_vec();
    full.extend(["--format", "json", "--deterministic"]);
    let out = robex(&full);
    let text = String::from_utf8(out.stdout).unwrap();
    let value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"));
    (out.status.code().unwrap(), value)
}

fn number(v: &Value) -> f64 {
    match v {
        Value::String(s) => s.parse().unwrap(),
        other => other.as_f64().unwrap(),
    }
}

const THRESHOLD: f64 = 0.64735516 / 0.93198992;

#[test]
fn robust_exit_codes() {
    let base = ["robust", "--model", "builtin:kappa1", "--point", "0.7"];
    let (code, v) = json(&[&base[..], &["--eps", "0.005"]].concat());
    assert_eq!(code, 0);
    assert_eq!(v["verdict"], "robust");

    let (code, v) = json(&[&base[..], &["--eps", "0.1"]].concat());
    assert_eq!(code, 10);
    assert_eq!(v["verdict"], "not-robust");
    assert!(number(&v["witness"][0]) < THRESHOLD);

    let out = robex(&["robust", "--model", "/no/such/model.json", "--point", "1", "--eps", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn robust_respects_constraints_and_sampling() {
    let (code, v) = json(&[
        "robust",
        "--model",
        "builtin:kappa1",
        "--point",
        "0.7",
        "--eps",
        "0.1",
        "--constrain",
        "1>=0.695",
    ]);
    assert_eq!(code, 0, "{v}");
    let (_, v) = json(&[
        "robust",
        "--model",
        "builtin:kappa1",
        "--point",
        "0.7",
        "--eps",
        "0.005",
        "--samples",
        "50",
    ]);
    assert_eq!(v["sampling"]["clean"], 50);
}

#[test]
fn global_straddles_the_threshold() {
    let (code, v) = json(&["global", "--model", "builtin:kappa1", "--eps", "0.01"]);
    assert_eq!(code, 10);
    let (a, b) = (number(&v["v"][0]), number(&v["x"][0]));
    assert!(a.min(b) < THRESHOLD && THRESHOLD <= a.max(b) + 1e-9);
    assert!((a - b).abs() <= 0.01);
}

#[test]
fn global_on_constant_model_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("const.json");
    std::fs::write(
        &path,
        r#"{"format":"robex-model","version":1,"classes":["0","1"],
            "features":[{"name":"a","domain":"binary"},{"name":"b","domain":"binary"}],
            "body":{"kind":"constant","label":0}}"#,
    )
    .unwrap();
    let out = robex(&[
        "global",
        "--model",
        path.to_str().unwrap(),
        "--norm",
        "l0",
        "--eps",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn explain_commands() {
    let base = ["--model", "builtin:kappa2", "--point", "0,1"];
    let (code, v) = json(&[&["explain", "axp"][..], &base, &["--eps", "0.7"]].concat());
    assert_eq!(code, 0);
    assert_eq!(v["features"], serde_json::json!([1]));

    let (code, v) = json(&[&["explain", "enumerate"][..], &base, &["--eps", "0.5"]].concat());
    assert_eq!(code, 0);
    assert_eq!(v["axps"], serde_json::json!([[]]));
    assert_eq!(v["cxps"], serde_json::json!([]));
    assert_eq!(v["complete"], true);

    let (code, v) = json(&[&["explain", "enumerate"][..], &base, &["--eps", "0.7", "--limit", "1"]].concat());
    assert_eq!(code, 0);
    let n = v["axps"].as_array().unwrap().len() + v["cxps"].as_array().unwrap().len();
    assert_eq!(n, 1);
    assert_eq!(v["complete"], false);
}

#[test]
fn demo_derives_its_numbers() {
    let (code, v) = json(&["demo"]);
    assert_eq!(code, 0);
    assert!((number(&v["transition"]) - 0.69459459).abs() < 1e-6);
    assert!((number(&v["flip_threshold"]) - 0.00540541).abs() < 1e-6);
    assert!(!v["certify"].as_array().unwrap().is_empty());
}

fn gen(dir: &Path, count: &str) {
    let out = robex(&["gen", "--dir", dir.to_str().unwrap(), "--count", count, "--seed", "3"]);
    assert!(out.status.success());
}

#[test]
fn bench_rows_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "5");
    let (code, v) = json(&["bench", "--dir", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r["aex"] == true), "{v}");

    std::fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    let out = robex(&[
        "bench",
        "--dir",
        dir.path().to_str().unwrap(),
        "--format",
        "csv",
        "--deterministic",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let broken: Vec<&str> = text.lines().filter(|l| l.starts_with("broken,")).collect();
    assert_eq!(broken.len(), 2);
    assert!(broken.iter().all(|l| l.contains("error")));
    assert_eq!(text.lines().filter(|l| l.ends_with(",Yes,-")).count(), 10);

    let empty = tempfile::tempdir().unwrap();
    let out = robex(&["bench", "--dir", empty.path().to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);
}

#[test]
fn external_solver_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let solver = format!("cmd:{BIN} sat");
    let status = Command::new(BIN)
        .args([
            "robust",
            "--model",
            "builtin:kappa2",
            "--point",
            "0,1",
            "--eps",
            "0.7",
            "--qs",
            "0.1",
        ])
        .args([
            "--format",
            "json",
            "--deterministic",
            "--out",
            out_path.to_str().unwrap(),
        ])
        .env("ROBEX_SOLVER", &solver)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(10));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["route"], "sat");

    let bad = robex(&["demo", "--solver", "magic"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sat_front_end() {
    let dir = tempfile::tempdir().unwrap();
    let sat = dir.path().join("a.cnf");
    std::fs::write(&sat, "p cnf 2 2\n1 2 0\n-1 0\n").unwrap();
    let out = robex(&["sat", sat.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(10));
    assert!(String::from_utf8(out.stdout).unwrap().contains("v -1 2 0"));
    std::fs::write(&sat, "p cnf 1 2\n1 0\n-1 0\n").unwrap();
    assert_eq!(robex(&["sat", sat.to_str().unwrap()]).status.code(), Some(20));
}

#[test]
fn deterministic_output_is_byte_identical() {
    let run = || robex(&["demo", "--format", "json", "--deterministic", "--seed", "5"]).stdout;
    assert_eq!(run(), run());
}
