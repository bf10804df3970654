use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn riemheat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riemheat")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let col = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

fn two_column(path: &Path) -> Vec<(f64, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let mut it = l.split_whitespace().map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect()
}

#[test]
fn radius_euclidean_is_one_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = riemheat(&["radius", "--model", "euclidean", "--m", "2", "--eps", "0.2", "--grid", "16x16", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = csv_column(&dir.path().join("radius_field.csv"), "R_eps");
    assert_eq!(r.len(), 256);
    assert!(r.iter().all(|&v| (v - 1.0).abs() <= 1e-3));
    let summary = read_json(&dir.path().join("radius_summary.json"));
    assert_eq!(summary["schema_version"], 1);
    assert_eq!(summary["uniform_lower_bound"].as_f64(), Some(1.0));
}

#[test]
fn radius_halfplane_is_isometry_invariant() {
    // horizontal translations and dilations are isometries, so R_eps is constant
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = riemheat(&[
        "radius",
        "--model",
        "hyperbolic-halfplane",
        "--m",
        "1",
        "--eps",
        "0.2",
        "--grid",
        "5x5",
        "--grid-lo=-0.5,0.8",
        "--grid-hi",
        "0.5,1.6",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = csv_column(&dir.path().join("radius_field.csv"), "R_eps");
    let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(lo > 0.0 && hi - lo <= 2e-3, "{lo} {hi}");
}

#[test]
fn unknown_model_names_itself() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["radius", "cover", "solve"] {
        let o = riemheat(&[cmd, "--model", "klein-bottle", "--out", dir.path().to_str().unwrap()]);
        assert!(!o.status.success());
        assert!(stderr(&o).contains("klein-bottle"), "{}", stderr(&o));
    }
}

#[test]
fn cover_euclidean_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = riemheat(&[
        "cover",
        "--model",
        "euclidean",
        "--m",
        "1",
        "--eps",
        "0.2",
        "--k",
        "0",
        "--box-lo=-2,-2",
        "--box-hi",
        "3,3",
        "--grid-lo",
        "0,0",
        "--grid-hi",
        "1,1",
        "--grid",
        "3x3",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = read_json(&dir.path().join("covering.json"));
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["certificate"]["disjoint"], true);
    let t = doc["certificate"]["T_bound"].as_f64().unwrap();
    assert!((t - 1.5 * 1e4).abs() < 1e-6);
    assert_eq!(doc["covering"]["cover_radii"][0].as_f64(), Some(0.1));
}

#[test]
fn cover_halfplane_level_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = riemheat(&[
        "cover",
        "--model",
        "hyperbolic-halfplane",
        "--m",
        "1",
        "--eps",
        "0.3333333333333333",
        "--k",
        "2",
        "--grid-lo=-0.3,0.8",
        "--grid-hi",
        "0.3,1.2",
        "--grid",
        "3x3",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = read_json(&dir.path().join("covering.json"));
    let bound = doc["dilated"]["bound"].as_f64().unwrap();
    assert!(doc["dilated"]["overlap"].as_f64().unwrap() <= bound);
}

#[test]
fn exponents_spot_values() {
    let o = riemheat(&["exponents", "--m", "2", "--n", "4", "--r", "4"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let json: Value = serde_json::from_str(&text[text.find('{').unwrap()..]).unwrap();
    let t = &json["table"];
    assert_eq!((t["beta"].as_str(), t["gamma"].as_str(), t["delta"].as_str()), (Some("3"), Some("12"), Some("10")));
    assert_eq!(json["weights"]["w2_exp"], "48");
    assert!(text.contains("rho_k"));
}

#[test]
fn exponents_functions_variant() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = riemheat(&["exponents", "--m", "2", "--n", "4", "--r", "4", "--variant", "functions", "--out", out]);
    assert!(o.status.success());
    let t = &read_json(&dir.path().join("exponents.json"))["table"];
    // b'_k = k(4m - 1) + 2m, d'_k = m + k(4m - 1)
    let row = &t["rows"][1];
    assert_eq!((row["b"].as_str(), row["d"].as_str()), (Some("11"), Some("9")));
    assert_eq!(t["variant"], "functions");
}

#[test]
fn exponents_reject_r_below_two() {
    let o = riemheat(&["exponents", "--r", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("domain error"));
}

#[test]
fn solve_zero_forcing_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = riemheat(&[
        "solve",
        "--model",
        "flat-torus(6.283185307179586)",
        "--cells",
        "16",
        "--forcing",
        "zero",
        "--dt",
        "0.05",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(two_column(&dir.path().join("norm_u.dat")).iter().all(|&(_, u)| u == 0.0));
    assert!(two_column(&dir.path().join("int_norm_omega.dat")).iter().all(|&(_, w)| w == 0.0));
}

#[test]
fn solve_eigen_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = riemheat(&[
        "solve",
        "--model",
        "flat-torus(6.283185307179586)",
        "--cells",
        "64",
        "--forcing",
        "eigen",
        "--horizon",
        "1",
        "--alpha",
        "0.2",
        "--dt",
        "0.005",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    // ||sin x sin y||_{L2(T^2)} = pi
    for (t, u) in two_column(&dir.path().join("norm_u.dat")).into_iter().filter(|p| p.0 >= 0.2) {
        let exact = PI * (1.0 - (-2.0 * t).exp()) / 2.0;
        assert!((u - exact).abs() <= 0.01 * exact, "t={t}: {u} vs {exact}");
    }
    let lines = fs::read_to_string(dir.path().join("solve.jsonl")).unwrap();
    let last: Value = serde_json::from_str(lines.lines().last().unwrap()).unwrap();
    assert_eq!(last["record"], "contraction");
    assert_eq!(last["holds"], true);
}

#[test]
fn solve_rejects_nonpositive_dt() {
    for dt in ["0", "-0.1"] {
        let o = riemheat(&["solve", "--model", "euclidean", "--dt", dt]);
        assert_eq!(o.status.code(), Some(2));
        assert!(stderr(&o).contains("dt"), "{}", stderr(&o));
    }
}

#[test]
fn solve_estimates_on_a_sub_box() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = riemheat(&[
        "solve",
        "--model",
        "euclidean",
        "--solve-lo",
        "3,3",
        "--solve-hi",
        "7,7",
        "--cells",
        "24",
        "--forcing",
        r#"{"name":"bump","center":[5,5],"radius":1.5,"amplitude":1,"profile":{"kind":"constant"}}"#,
        "--horizon",
        "0.3",
        "--alpha",
        "0.1",
        "--dt",
        "0.02",
        "--estimates",
        "--m",
        "2",
        "--r",
        "2",
        "--grid",
        "4x4",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("solve.jsonl")).unwrap();
    let recs: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let global = recs.iter().find(|r| r["record"] == "global").unwrap();
    assert!(global["report"]["ratio"].as_f64().unwrap().is_finite());
    let local = recs.iter().find(|r| r["record"] == "local").unwrap();
    assert!(local["report"]["c_emp"].as_f64().unwrap() > 0.0);

    let whole = riemheat(&["solve", "--model", "euclidean", "--estimates", "--out", out]);
    assert_eq!(whole.status.code(), Some(2));
}

#[test]
fn verify_suites() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for suite in ["exponents", "covering"] {
        let o = riemheat(&["verify", suite, "--out", out]);
        assert!(o.status.success(), "{suite}: {}", String::from_utf8_lossy(&o.stdout));
        let report = read_json(&dir.path().join(format!("verify_{suite}.json")));
        assert_eq!(report["schema_version"], 1);
        assert_eq!(report["passed"], true);
    }
    let o = riemheat(&["verify", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn identical_config_gives_identical_files() {
    let base = tempfile::tempdir().unwrap();
    let cfg = base.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"model": "perturbed-euclidean(0.1,1)", "cells": 20, "horizon": 0.2, "alpha": 0.1, "dt": 0.02,
            "forcing": {"name": "bump", "center": [0, 0], "radius": 1.5, "amplitude": 1, "profile": {"kind": "ramp", "t_on": 0.1}}}"#,
    )
    .unwrap();
    let runs: Vec<_> = (0..2)
        .map(|i| {
            let out = base.path().join(format!("run{i}"));
            let o = riemheat(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
            assert!(o.status.success(), "{}", stderr(&o));
            out
        })
        .collect();
    let mut names: Vec<_> = fs::read_dir(&runs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["contraction.csv", "int_norm_omega.dat", "norm_u.dat", "solve.jsonl"]);
    for name in names {
        assert_eq!(fs::read(runs[0].join(&name)).unwrap(), fs::read(runs[1].join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn flags_override_config_keys() {
    let base = tempfile::tempdir().unwrap();
    let cfg = base.path().join("run.json");
    fs::write(&cfg, r#"{"model": "euclidean", "m": 2, "eps": 0.5, "grid": "4x4"}"#).unwrap();
    let out = base.path().join("out");
    let bad = riemheat(&["radius", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("eps"));
    let good = riemheat(&["radius", "--config", cfg.to_str().unwrap(), "--eps", "0.1", "--out", out.to_str().unwrap()]);
    assert!(good.status.success(), "{}", stderr(&good));
    assert_eq!(read_json(&out.join("radius_summary.json"))["setup"]["params"]["eps"].as_f64(), Some(0.1));
}

#[test]
fn config_errors_carry_positions() {
    let base = tempfile::tempdir().unwrap();
    let cfg = base.path().join("run.json");
    fs::write(&cfg, "{\n  \"model\": \"euclidean\",\n  \"m\": \"two\"\n}").unwrap();
    let o = riemheat(&["radius", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    fs::write(&cfg, r#"{"model": "euclidean", "epsilon": 0.2}"#).unwrap();
    let o = riemheat(&["radius", "--config", cfg.to_str().unwrap()]);
    assert!(stderr(&o).contains("epsilon"), "{}", stderr(&o));
}

#[test]
fn thread_cap_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_riemheat"))
            .env("MP_THREADS", threads)
            .args(["radius", "--model", "euclidean", "--grid", "4x4", "--out", dir.path().to_str().unwrap()])
            .output()
            .unwrap()
    };
    assert!(run("1").status.success());
    assert_eq!(run("0").status.code(), Some(2));
}
