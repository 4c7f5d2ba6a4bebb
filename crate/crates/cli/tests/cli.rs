use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn geoflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoflow"))
        .args(args)
        .output()
        .expect("failed to start geoflow")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("run.json")).unwrap()).unwrap()
}

/// Every CSV under `dir`, keyed by relative path.
fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn numbers(path: &Path) -> Vec<f64> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .collect()
}

const SMALL_RUN: [&str; 10] = ["--model", "2ch", "--ic", "pair:1:0.1:1:0.1", "--n", "64", "--dt", "1e-3", "--t-end", "0.1"];

#[test]
fn missing_model_names_the_flag() {
    let out = geoflow(&["evolve", "--ic", "cosmode:1:0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--model"), "{}", stderr(&out));
}

#[test]
fn odd_grid_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("out");
    let out = geoflow(&[
        "evolve", "--model", "2ch", "--ic", "cosmode:1:0.1", "--n", "255", "--out-dir", dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("grid size must be even"), "{}", stderr(&out));
}

#[test]
fn bad_values_are_named() {
    let out = geoflow(&["evolve", "--model", "3ch", "--ic", "zero"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("3ch"));
    let out = geoflow(&["evolve", "--model", "2ch", "--ic", "sine:1:1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sine:1:1"));
}

#[test]
fn evolve_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let mut args = vec!["evolve"];
    args.extend(SMALL_RUN);
    args.extend(["--stride", "50", "--out-dir", dir.to_str().unwrap()]);
    let out = geoflow(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let m = manifest(&dir);
    assert_eq!(m["status"], "completed");
    assert!(m.get("reason").is_none());
    assert_eq!(m["config"]["n"], 64);
    assert!(m["wall_seconds"].as_f64().unwrap() >= 0.0);
    assert!((m["final_diagnostics"]["t"].as_f64().unwrap() - 0.1).abs() < 1e-12);

    let diag = fs::read_to_string(dir.join("diagnostics.csv")).unwrap();
    assert!(diag.starts_with("t,energy,min_ux,max_abs_rhox,mean_m,mean_rho\n"));
    assert_eq!(diag.lines().count(), 4);
    let snap = fs::read_to_string(dir.join("snapshots/snapshot_00002.csv")).unwrap();
    assert!(snap.starts_with("x,u,rho\n"));
    assert_eq!(snap.lines().count(), 65);
}

#[test]
fn steep_data_exits_with_blowup() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let out = geoflow(&[
        "evolve",
        "--model",
        "2ch",
        "--ic",
        "cosmode:3:1",
        "--n",
        "128",
        "--dt",
        "1e-4",
        "--t-end",
        "0.5",
        "--slope-threshold",
        "-50",
        "--rhox-threshold",
        "50",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let m = manifest(&dir);
    assert_eq!(m["status"], "blowup_detected");
    assert_eq!(m["reason"], "min_ux");
    assert!(m["final_diagnostics"]["min_ux"].as_f64().unwrap() < -50.0);
}

#[test]
fn curvature_scan_is_positive() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("scan");
    let out = geoflow(&["curvature-scan", "--max-mode", "3", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(dir.join("scan.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m_k1,m_k2,m_l1,m_l2,S_numeric,S_closed,Sec,gram"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(!rows.is_empty());
    for r in &rows {
        assert!(r[4] > 0.0, "{r:?}");
        assert!((r[4] - r[5]).abs() <= 1e-8 * r[5].abs(), "{r:?}");
    }
}

#[test]
fn single_plane_curvature() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("plane");
    let out = geoflow(&["curvature", "--second-only", "--k2", "2", "--l2", "5", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let m = manifest(&dir);
    assert!((m["final_diagnostics"]["gram"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!(m["final_diagnostics"]["Sec"].as_f64().unwrap() >= 0.125);

    let out = geoflow(&["curvature", "--k1", "1", "--k2", "2", "--l1", "1", "--l2", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let dir = tmp.path().join(name);
        let mut args = vec!["flowmap"];
        args.extend(SMALL_RUN);
        args.extend(["--stride", "20", "--out-dir", dir.to_str().unwrap()]);
        let out = geoflow(&args);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        outputs.push(csv_files(&dir));
    }
    assert!(outputs[0].iter().any(|(p, _)| p.contains("flowmap_")));
    assert!(outputs[0].iter().any(|(p, _)| p == "momentum.csv"));
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn manifest_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let mut args = vec!["evolve"];
    args.extend(SMALL_RUN);
    args.extend(["--out-dir", first.to_str().unwrap()]);
    assert_eq!(geoflow(&args).status.code(), Some(0));

    let out = geoflow(&[
        "run",
        "--config",
        first.join("run.json").to_str().unwrap(),
        "--out-dir",
        second.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(csv_files(&first), csv_files(&second));
    let (a, b) = (manifest(&first), manifest(&second));
    assert_eq!(a["config"]["model"], b["config"]["model"]);
    assert_eq!(a["final_diagnostics"], b["final_diagnostics"]);
}

#[test]
fn snapshot_file_as_initial_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let mut args = vec!["evolve"];
    args.extend(SMALL_RUN);
    args.extend(["--out-dir", first.to_str().unwrap()]);
    assert_eq!(geoflow(&args).status.code(), Some(0));

    let ic = format!("file:{}", first.join("snapshots/snapshot_00000.csv").display());
    let second = tmp.path().join("second");
    let out = geoflow(&[
        "evolve", "--model", "2ch", "--ic", &ic, "--n", "64", "--dt", "1e-3", "--t-end", "0.1", "--out-dir",
        second.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    // Same data up to the rounding of a second dealiasing pass.
    let (a, b) = (numbers(&first.join("diagnostics.csv")), numbers(&second.join("diagnostics.csv")));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
    }

    let out = geoflow(&["evolve", "--model", "2ch", "--ic", &ic, "--n", "128"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("64 points"), "{}", stderr(&out));
}

#[test]
fn config_files_reject_unknown_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("cfg.json");
    fs::write(&path, r#"{"command": "evolve", "model": "2ch", "ic": "zero", "grid": 64}"#).unwrap();
    let out = geoflow(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("grid"), "{}", stderr(&out));

    fs::write(&path, r#"{"command": "verify", "max_mode": 3}"#).unwrap();
    let out = geoflow(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("max_mode"), "{}", stderr(&out));
}

#[test]
fn rigidbody_conserves_momentum() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("rb");
    let out = geoflow(&[
        "rigidbody",
        "--inertia",
        "1,2,3",
        "--omega",
        "-1,0.5,2",
        "--t-end",
        "2",
        "--stride",
        "100",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let m = manifest(&dir);
    assert!(m["final_diagnostics"]["spatial_momentum_drift"].as_f64().unwrap() <= 1e-8);
    let text = fs::read_to_string(dir.join("trajectory.csv")).unwrap();
    assert!(text.starts_with("t,w1,w2,w3,pi1,pi2,pi3,energy\n"));
    assert_eq!(text.lines().count(), 22);
    assert_eq!(m["config"]["omega"], serde_json::json!([-1.0, 0.5, 2.0]));

    let out = geoflow(&["rigidbody", "--inertia", "1,2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--inertia"), "{}", stderr(&out));
}

#[test]
fn quick_verify_passes() {
    let out = geoflow(&["verify", "--quick", "--seed", "3"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    assert!(stdout.contains("checks passed"));
}
