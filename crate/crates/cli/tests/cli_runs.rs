use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

const DIRAC: &str = r#"{
    "problem": {"horizon": 0.5, "generator": {"dirac_linear_y": 1.0}, "measure": {"dirac": -0.5},
                "terminal": {"constant": 1.0}},
    "solver": {"n_steps": 32, "n_paths": 100, "seed": 7}
}"#;

const BROWNIAN: &str = r#"{
    "problem": {"horizon": 1.0, "generator": "zero", "measure": {"dirac": -1.0},
                "terminal": {"functional_of_wt": [0.0, 1.0]}},
    "solver": {"n_steps": 32, "n_paths": 1000, "seed": 3}
}"#;

fn write_config(dir: &TempDir, text: &str) -> String {
    let path = dir.path().join("config.json");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn bsvie(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bsvie")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap())
}

fn summary(stdout: &str) -> serde_json::Value {
    serde_json::from_str(stdout).unwrap()
}

fn out_dir(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

#[test]
fn refusal_then_override() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, DIRAC);
    let out = out_dir(&dir, "refused");
    let (code, stdout) = bsvie(&["solve", "--config", &config, "--out", &out]);
    assert_eq!(code, 3);
    assert_eq!(summary(&stdout)["status"], "refused");
    assert!(Path::new(&out).join("contraction.json").exists());
    assert!(!Path::new(&out).join("solution.csv").exists());

    let out = out_dir(&dir, "forced");
    let (code, stdout) = bsvie(&["solve", "--config", &config, "--out", &out, "--override-contraction"]);
    assert_eq!(code, 0);
    assert_eq!(summary(&stdout)["status"], "converged");
    for f in ["solution.csv", "solution.json", "iterations.csv", "manifest.json", "summary.json"] {
        assert!(Path::new(&out).join(f).exists(), "{f}");
    }
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(bsvie(&["solve"]).0, 2);
    assert_eq!(bsvie(&["solve", "--config", "/nonexistent.json"]).0, 2);
    let bad = write_config(&dir, &DIRAC.replace(r#""seed": 7"#, r#""seed": -1"#));
    assert_eq!(bsvie(&["solve", "--config", &bad]).0, 2);
    assert_eq!(bsvie(&["classify", "--example", "dirac", "--horizon", "1"]).0, 2);
    assert_eq!(bsvie(&["frobnicate"]).0, 2);
}

#[test]
fn classify_and_contraction_flags() {
    let (code, stdout) = bsvie(&["classify", "--example", "dirac", "--horizon", "1", "--k", "1", "--mean", "0"]);
    assert_eq!(code, 0);
    assert_eq!(summary(&stdout)["verdict"], "MultipleSolutions");
    let (code, _) = bsvie(&["classify", "--example", "uniform", "--horizon", "1", "--k", "4", "--mean", "1"]);
    assert_eq!(code, 3);
    let (code, stdout) = bsvie(&["contraction", "--horizon", "1", "--k", "1"]);
    assert_eq!(code, 0);
    assert_eq!(summary(&stdout)["contracts"], false);
}

#[test]
fn oracle_compare_matches_dirac_closed_form() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, DIRAC);
    let out = out_dir(&dir, "oracle");
    let (code, stdout) = bsvie(&["oracle-compare", "--config", &config, "--out", &out, "--format", "csv"]);
    assert_eq!(code, 0, "{stdout}");
    let s = summary(&stdout);
    assert!(s["max_abs_error"].as_f64().unwrap() <= 0.02);
    let csv = std::fs::read_to_string(Path::new(&out).join("oracle.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,solver_mean,oracle_mean,abs_error");
    assert_eq!(csv.lines().count(), 34);
    assert!(!Path::new(&out).join("oracle.json").exists());
}

#[test]
fn oracle_compare_refuses_non_unique() {
    let dir = TempDir::new().unwrap();
    let text = DIRAC
        .replace(r#""horizon": 0.5"#, r#""horizon": 1.0"#)
        .replace(r#"{"dirac": -0.5}"#, r#"{"dirac": -1.0}"#);
    let config = write_config(&dir, &text);
    let (code, stdout) = bsvie(&["oracle-compare", "--config", &config, "--out", &out_dir(&dir, "o")]);
    assert_eq!(code, 3);
    assert_eq!(summary(&stdout)["classification"]["verdict"], "NoSolution");
}

#[test]
fn convergence_and_regularity_artifacts() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, BROWNIAN);
    let out = out_dir(&dir, "conv");
    let (code, stdout) = bsvie(&["convergence", "--config", &config, "--out", &out]);
    assert_eq!(code, 0);
    assert!(summary(&stdout)["rate"].is_null());
    assert!(Path::new(&out).join("convergence.csv").exists());

    let out = out_dir(&dir, "reg");
    let (code, stdout) = bsvie(&["regularity", "--config", &config, "--out", &out]);
    assert_eq!(code, 0);
    let exponent = summary(&stdout)["exponent"].as_f64().unwrap();
    assert!((0.3..=0.7).contains(&exponent), "{exponent}");
    let csv = std::fs::read_to_string(Path::new(&out).join("scaling.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, BROWNIAN);
    let (a, b) = (out_dir(&dir, "a"), out_dir(&dir, "b"));
    assert_eq!(bsvie(&["solve", "--config", &config, "--out", &a]).0, 0);
    assert_eq!(bsvie(&["solve", "--config", &config, "--out", &b]).0, 0);
    for f in ["solution.csv", "solution.json", "iterations.csv", "manifest.json", "summary.json"] {
        let (x, y) = (
            std::fs::read(Path::new(&a).join(f)).unwrap(),
            std::fs::read(Path::new(&b).join(f)).unwrap(),
        );
        assert_eq!(x, y, "{f}");
    }
}
