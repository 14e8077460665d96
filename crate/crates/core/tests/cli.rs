//! End-to-end runs of the `surfenv` binary.

use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_surfenv"));
    c.env_remove("SURFENV_CONFIG");
    c
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string(v).unwrap()).unwrap();
    p
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn read(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn frob(dir: &Path) -> PathBuf {
    write(dir, "frob.json", &json!({"dimension": 2, "kind": "frobenius"}))
}

#[test]
fn envelope_of_identity() {
    let t = tempfile::tempdir().unwrap();
    let d = frob(t.path());
    let m = write(t.path(), "id.json", &json!([[1.0, 0.0], [0.0, 1.0]]));
    let out = t.path().join("out");
    let o = run(bin()
        .args(["envelope", "-d"])
        .arg(&d)
        .arg("-F")
        .arg(&m)
        .args(["--resolution", "360", "--refine-iters", "50", "--seed", "7", "--out"])
        .arg(&out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read(&out.join("envelope.json"));
    let value = v["value"].as_f64().unwrap();
    assert!((value - 2.0).abs() < 1e-4, "{value}");
}

#[test]
fn bd_symmetry_violation_exits_two() {
    let t = tempfile::tempdir().unwrap();
    let d = write(
        t.path(),
        "aniso.json",
        &json!({"dimension": 2, "kind": "weighted-aniso", "params": {"w": [1.0, 3.0]}}),
    );
    let o = run(bin()
        .args(["check", "-d"])
        .arg(&d)
        .args(["--test", "bd-sym", "--samples", "100", "--seed", "1"]));
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.to_string().contains("bd_symmetry") || v.to_string().contains("violated"));
}

#[test]
fn check_is_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let d = frob(t.path());
    let go = |name: &str| {
        let out = t.path().join(name);
        let o = run(bin()
            .args(["check", "-d"])
            .arg(&d)
            .args(["--test", "subadd", "--samples", "50", "--seed", "9", "--out"])
            .arg(&out));
        assert_eq!(o.status.code(), Some(0));
        fs::read(out.join("report.json")).unwrap()
    };
    assert_eq!(go("a"), go("b"));
}

#[test]
fn construct_then_energy_round_trip() {
    let t = tempfile::tempdir().unwrap();
    let d = frob(t.path());
    let p = write(
        t.path(),
        "strip.json",
        &json!({"lambda": [0.0, 2.0], "xi": [0.0, 1.0], "eta": [0.0, 1.0]}),
    );
    let out = t.path().join("c");
    let o = run(bin()
        .args(["construct", "--family", "subadditivity_strip", "-p"])
        .arg(&p)
        .arg("-d")
        .arg(&d)
        .args(["--k", "4,8", "--plot", "--out"])
        .arg(&out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("closed_forms.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let plot = fs::read_to_string(out.join("plot_subadditivity_strip.csv")).unwrap();
    assert_eq!(plot.lines().count(), 3);
    assert!(read(&out.join("construction.json")).to_string().contains("subadditivity_strip"));

    let eout = t.path().join("e");
    let o = run(bin()
        .args(["energy", "-d"])
        .arg(&d)
        .arg("-u")
        .arg(out.join("field.json"))
        .arg("--out")
        .arg(&eout));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let total = read(&eout.join("energy.json"))["total"].as_f64().unwrap();
    let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row[0], 4.0);
    assert!((total - row[1]).abs() < 1e-9, "{total} vs {}", row[1]);
    let edges = fs::read_to_string(eout.join("edges.csv")).unwrap();
    assert!(edges.lines().count() > 1);
}

#[test]
fn elementary_field_energy_is_one() {
    let t = tempfile::tempdir().unwrap();
    let d = frob(t.path());
    let u = write(
        t.path(),
        "elementary.json",
        &json!({
            "eta": [0.0, 1.0],
            "lambda": [0.0, 1.0],
            "cells": [
                {"vertices": [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.0], [-0.5, 0.0]], "offset": [0.0, 0.0]},
                {"vertices": [[-0.5, 0.0], [0.5, 0.0], [0.5, 0.5], [-0.5, 0.5]], "spin": 0.0, "offset": [0.0, 1.0]}
            ]
        }),
    );
    let o = run(bin().args(["energy", "-d"]).arg(&d).arg("-u").arg(&u));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["total"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn dictionary_output() {
    let t = tempfile::tempdir().unwrap();
    let d = frob(t.path());
    let go = || {
        let o = run(bin()
            .args(["dict", "-d"])
            .arg(&d)
            .args(["--resolution", "4", "--seed", "2"]));
        assert_eq!(o.status.code(), Some(0));
        o.stdout
    };
    let a = go();
    assert_eq!(a, go());
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["atoms"].as_array().unwrap().len(), 16);
}

#[test]
fn input_errors_exit_one() {
    let t = tempfile::tempdir().unwrap();
    let d = frob(t.path());
    let m = write(t.path(), "id.json", &json!([[1.0, 0.0], [0.0, 1.0]]));
    let o = run(bin().args(["envelope", "-d"]).arg(&d).arg("-F").arg(&m));
    assert_eq!(o.status.code(), Some(1), "seed is required");

    let bad = write(
        t.path(),
        "bad.json",
        &json!({"dimension": 2, "kind": "weighted-aniso", "params": {"w": [1.0]}}),
    );
    let o = run(bin().args(["validate", "-d"]).arg(&bad).args(["--seed", "0"]));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("params.w"));

    let o = run(bin().args(["envelope", "-d"]).arg(&d).arg("-F").arg(t.path().join("missing.json")).args(["--seed", "1"]));
    assert_eq!(o.status.code(), Some(1));

    let p = write(t.path(), "p.json", &json!({"lambda": [1.0, 0.0], "eta": [0.0, 1.0]}));
    let o = run(bin()
        .args(["construct", "--family", "symmetry_triangles", "-p"])
        .arg(&p)
        .arg("-d")
        .arg(&d)
        .args(["--k", "5"]));
    assert_eq!(o.status.code(), Some(1), "odd k is rejected");
}

#[test]
fn config_file_supplies_seed() {
    let t = tempfile::tempdir().unwrap();
    let d = frob(t.path());
    let m = write(t.path(), "g.json", &json!([[0.0, 0.5], [0.5, 0.0]]));
    let cfg = write(t.path(), "cfg.json", &json!({"seed": 3, "resolution": 16}));
    let o = run(bin()
        .env("SURFENV_CONFIG", &cfg)
        .args(["envelope", "--symmetric", "-d"])
        .arg(&d)
        .arg("-F")
        .arg(&m));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let bad = write(t.path(), "bad_cfg.json", &json!({"sead": 3}));
    let o = run(bin().arg("--config").arg(&bad).args(["validate", "-d"]).arg(&d).args(["--seed", "1"]));
    assert_eq!(o.status.code(), Some(1));
}
