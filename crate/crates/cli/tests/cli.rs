use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use sha2::{Digest, Sha256};

fn shl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_shl"))
        .args(args)
        .env("SHL_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn run(experiment: &str, config: &str, dir: &Path) -> i32 {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let status = shl(&[
        experiment,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    status.status.code().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("out/manifest.json")).unwrap()).unwrap()
}

#[test]
fn solver_writes_a_complete_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"N": 3, "k": 1, "alpha": 1, "p": 3.5, "q": 2.5}"#;
    assert_eq!(run("solve-nls", config, dir.path()), 0);
    let m = manifest(dir.path());
    assert_eq!(m["status"], "passed");
    assert_eq!(m["subcommand"], "solve-nls");
    assert_eq!(m["version"], shl_core::VERSION);
    let config_hash = hex::encode(Sha256::digest(config.as_bytes()));
    assert_eq!(m["config_sha256"], config_hash.as_str());
    let names: Vec<&str> = m["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    for name in [
        "results.csv",
        "v.bin",
        "u.bin",
        "solution.json",
        "slices.csv",
        "plot.svg",
    ] {
        assert!(names.contains(&name), "{name} missing from {names:?}");
    }
    for f in m["files"].as_array().unwrap() {
        let bytes = fs::read(dir.path().join("out").join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&bytes)), f["sha256"].as_str().unwrap());
    }
    let solution: Value = serde_json::from_slice(&fs::read(dir.path().join("out/solution.json")).unwrap()).unwrap();
    assert!(solution["el_residual"].as_f64().unwrap() <= 1e-4);
    assert!(solution["energy"].as_f64().unwrap() > 0.0);

    // the stored field reads back onto the same grid shape
    let bin = fs::read(dir.path().join("out/v.bin")).unwrap();
    let (header, values) = shl_core::io::read_field(bin.as_slice()).unwrap();
    assert_eq!((header.n, header.k), (3, 1));
    assert_eq!(values.len(), header.rows * header.cols);

    // a rerun reproduces the history byte for byte
    let first = fs::read(dir.path().join("out/results.csv")).unwrap();
    let again = tempfile::tempdir().unwrap();
    assert_eq!(run("solve-nls", config, again.path()), 0);
    assert_eq!(first, fs::read(again.path().join("out/results.csv")).unwrap());
    assert_eq!(manifest(dir.path()), manifest(again.path()));
}

#[test]
fn missing_key_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run("solve-nls", r#"{"k": 1, "alpha": 1, "p": 3.5, "q": 2.5}"#, dir.path()),
        1
    );
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("thresholds", r#"{"N": 4, "k": 2, "colour": "red"}"#, dir.path()), 1);
    assert_eq!(
        run(
            "solve-nls",
            r#"{"N": 3, "k": 1, "alpha": 1, "p": 3.5, "q": 2.5, "extra": 0}"#,
            dir.path()
        ),
        1
    );
    assert!(!dir.path().join("out").exists());
}

#[test]
fn inadmissible_exponents_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    // p above the Sobolev exponent 6 in three dimensions
    assert_eq!(
        run(
            "solve-nls",
            r#"{"N": 3, "k": 1, "alpha": 1, "p": 6.5, "q": 2.5}"#,
            dir.path()
        ),
        1
    );
    assert!(!dir.path().join("out").exists());
}

#[test]
fn threshold_table_lists_every_alpha() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run("thresholds", r#"{"N": 4, "k": 2, "alphas": [0.5, 1, 2]}"#, dir.path()),
        0
    );
    let csv = fs::read_to_string(dir.path().join("out/thresholds.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "alpha,lambda,mu,valid,st_q");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("1,0,2,true,"));
}

#[test]
fn output_dir_comes_from_the_config_unless_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_config");
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        format!(r#"{{"N": 3, "output_dir": {:?}}}"#, target.to_str().unwrap()),
    )
    .unwrap();
    let out = shl(&["verify-resolvent", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(target.join("manifest.json").exists());
    assert!(target.join("resolvent.csv").exists());
}

#[test]
fn bad_thread_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"N": 4, "k": 2}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_shl"))
        .args([
            "thresholds",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ])
        .env("SHL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_check_still_writes_outputs() {
    // an impossible tolerance turns the comparison into a failed check
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("verify-resolvent", r#"{"N": 3, "tol": 1e-300}"#, dir.path()), 2);
    assert_eq!(manifest(dir.path())["status"], "failed");
    assert!(dir.path().join("out/resolvent.csv").exists());
}
