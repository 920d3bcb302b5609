//! Binary-level tests: exit codes, report contents, and byte-identical
//! reruns of the written artifacts.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fractal-quant"));
    cmd.env_remove("FRACTAL_QUANT_BUDGET");
    cmd
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fractal-quant-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout_json(output: &Output) -> serde_json::Value {
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is a JSON report")
}

#[test]
fn kappa_matches_the_closed_form() {
    let output = bin().args(["kappa", "--example", "2", "--r", "1"]).output().unwrap();
    let report = stdout_json(&output);
    let exponent = report["solution"]["exponent"].as_f64().unwrap();
    assert!((exponent - 0.430677).abs() < 1e-6);
}

#[test]
fn kappa_solves_a_spec_file() {
    let dir = scratch("spec");
    let path = dir.join("halving.json");
    fs::write(
        &path,
        r#"{
            "dimension": 1,
            "ambient": { "lo": [0.0], "hi": [1.0] },
            "components": [{
                "maps": [
                    { "ratio": 0.5, "translation": [0.0] },
                    { "ratio": 0.5, "translation": [0.5] }
                ],
                "probs": [0.5, 0.5]
            }],
            "zeta": [1.0],
            "r": 1.0
        }"#,
    )
    .unwrap();
    let output = bin()
        .args(["kappa", "--spec", path.to_str().unwrap()])
        .output()
        .unwrap();
    let report = stdout_json(&output);
    let exponent = report["solution"]["exponent"].as_f64().unwrap();
    assert!((exponent - 1.0).abs() < 1e-10);
}

#[test]
fn invalid_spec_exits_2_and_names_the_component() {
    let dir = scratch("invalid");
    let path = dir.join("bad.json");
    fs::write(
        &path,
        r#"{
            "dimension": 1,
            "ambient": { "lo": [0.0], "hi": [1.0] },
            "components": [{
                "maps": [
                    { "ratio": 0.5, "translation": [0.0] },
                    { "ratio": 0.5, "translation": [0.5] }
                ],
                "probs": [0.5, 0.4]
            }],
            "zeta": [1.0],
            "r": 1.0
        }"#,
    )
    .unwrap();
    let output = bin()
        .args(["kappa", "--spec", path.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("components[0]"), "stderr: {stderr}");
}

#[test]
fn missing_source_exits_2() {
    let output = bin().args(["kappa"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn exhausted_budget_exits_3() {
    let output = bin()
        .args(["pipeline", "--example", "1", "--n-max", "16"])
        .env("FRACTAL_QUANT_BUDGET", "10")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn pipeline_artifacts_are_deterministic() {
    let run = |tag: &str| {
        let dir = scratch(tag);
        let output = bin()
            .args(["pipeline", "--example", "1", "--seed", "4", "--n-max", "64"])
            .args(["--out", dir.to_str().unwrap()])
            .output()
            .unwrap();
        stdout_json(&output);
        dir
    };
    let (a, b) = (run("pipe-a"), run("pipe-b"));
    let series = fs::read(a.join("series.csv")).unwrap();
    assert_eq!(series, fs::read(b.join("series.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("summary.json")).unwrap(),
        fs::read(b.join("summary.json")).unwrap()
    );
    let text = String::from_utf8(series).unwrap();
    assert!(text.starts_with("n;error;pointwise\n"));
    assert_eq!(text.lines().count(), 4); // header + 16, 32, 64
}

#[test]
fn pipeline_runs_the_seeded_search() {
    let output = bin()
        .args(["pipeline", "--example", "1", "--n-max", "32", "--lloyd", "--restarts", "2"])
        .output()
        .unwrap();
    let report = stdout_json(&output);
    assert!(report["run"]["estimate"]["slope_fit"].as_f64().unwrap() > 0.0);
}

#[test]
fn shallow_depth_warns_on_stderr() {
    let output = bin()
        .args(["pipeline", "--example", "1", "--n-max", "64", "--depth", "7"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("warning"), "stderr: {stderr}");
}

#[test]
fn reproduce_reports_the_window_dichotomy() {
    let dir = scratch("repro");
    let output = bin()
        .args(["reproduce", "2", "--out", dir.to_str().unwrap()])
        .output()
        .unwrap();
    let report = stdout_json(&output);
    assert_eq!(report["products_are_unit"], true);
    assert_eq!(report["drift"]["consistent"], true);
    assert!(dir.join("windows.csv").exists());
    assert!(dir.join("report.json").exists());

    let output = bin().args(["reproduce", "3"]).output().unwrap();
    let report = stdout_json(&output);
    assert_eq!(report["drift"]["consistent"], false);
    assert!(report["letter_count_identity_gap"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn reproduce_certifies_separation() {
    let output = bin().args(["reproduce", "1"]).output().unwrap();
    let report = stdout_json(&output);
    assert_eq!(report["uessc"]["holds"], true);
    let beta = report["uessc"]["beta"].as_f64().unwrap();
    assert!((beta - 2.0 / 3.0).abs() <= 1e-9, "beta = {beta}");
    assert_eq!(report["suosc"]["holds"], true);
}
