use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fellkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fellkit")).args(args).env_remove("FELLKIT_EPS").output().expect("binary runs")
}

fn fellkit_env(args: &[&str], eps: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fellkit")).args(args).env("FELLKIT_EPS", eps).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn generate_then_check_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("semi.json").to_string_lossy().into_owned();
    let o = fellkit(&["generate", "--preset", "semidirect", "--n", "3", "--dim", "2", "--seed", "9", "--out", &path]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());

    let o = fellkit(&["check", "axioms", "--input", &path, "--samples", "30"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("axioms: PASS"));

    let o = fellkit(&["report", "--input", &path, "--samples", "20", "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);
    let names: Vec<&str> = v["reports"].as_array().unwrap().iter().map(|r| r["check"].as_str().unwrap()).collect();
    assert_eq!(
        names,
        ["axioms", "pair", "cocycle", "theorem-3.13", "generation", "phi-build", "phi-readoff", "phi-roundtrip"]
    );
}

#[test]
fn generated_file_reloads_identically() {
    let dir = tempfile::tempdir().unwrap();
    let first = fellkit(&["generate", "--preset", "cycle", "--seed", "4"]);
    let path = write(dir.path(), "cycle.json", &String::from_utf8_lossy(&first.stdout));
    let second = fellkit(&["generate", "--input", &path]);
    assert_eq!(code(&second), 0);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn every_check_kind_parses() {
    for kind in ["axioms", "pair", "cocycle", "theorem-3.13", "generation"] {
        let o = fellkit(&["check", kind, "--preset", "fourpoint", "--samples", "10"]);
        assert_eq!(code(&o), 0, "{kind}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for action in ["build", "readoff", "roundtrip"] {
        let o = fellkit(&["phi", action, "--preset", "fourpoint", "--samples", "10"]);
        assert_eq!(code(&o), 0, "{action}");
    }
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // A transposition does not move 1 to 3, so its orbit misses pairs.
    let body = r#"{"points": 4, "fibre_dims": [1,1,1,1],
        "generator": {"permutation": [2,1,3,4], "fibre_maps": [[[[1,0]]],[[[1,0]]],[[[1,0]]],[[[1,0]]]]}}"#;
    let path = write(dir.path(), "swap.json", body);
    let o = fellkit(&["check", "generation", "--input", &path]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("generation: FAIL"));

    let o = fellkit(&["phi", "build", "--input", &path, "--format", "json"]);
    assert_eq!(code(&o), 1);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], false);
}

#[test]
fn usage_and_parse_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fellkit(&["check", "axioms"])), 2);
    assert_eq!(code(&fellkit(&["check", "nonsense", "--preset", "fourpoint"])), 2);
    assert_eq!(code(&fellkit(&["report", "--preset", "fourpoint", "--input", "x.json"])), 2);
    assert_eq!(code(&fellkit(&["report", "--preset", "nope"])), 2);
    assert_eq!(code(&fellkit(&["report", "--preset", "fourpoint", "--samples", "0"])), 2);
    assert_eq!(code(&fellkit(&["report", "--input", "/nonexistent/model.json"])), 2);

    let bad = write(dir.path(), "bad.json", r#"{"points": 2, "fibre_dims": [1, 1], "extra": true}"#);
    let o = fellkit(&["report", "--input", &bad]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());

    let mismatch = write(dir.path(), "mismatch.json", r#"{"points": 3, "fibre_dims": [1, 1]}"#);
    assert_eq!(code(&fellkit(&["report", "--input", &mismatch])), 2);
}

#[test]
fn runs_are_deterministic() {
    let args = ["report", "--preset", "semidirect", "--seed", "11", "--samples", "40", "--format", "json"];
    let a = fellkit(&args);
    let b = fellkit(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = fellkit(&["report", "--preset", "semidirect", "--seed", "12", "--samples", "40", "--format", "json"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn eps_from_environment_and_flag() {
    let args = ["check", "axioms", "--preset", "semidirect", "--samples", "20"];
    // Roundoff is far above 1e-30, far below 1e-9.
    assert_eq!(code(&fellkit_env(&args, "1e-30")), 1);
    assert_eq!(code(&fellkit_env(&args, "1e-9")), 0);
    let mut with_flag = args.to_vec();
    with_flag.extend(["--eps", "1e-9"]);
    assert_eq!(code(&fellkit_env(&with_flag, "1e-30")), 0);
    assert_eq!(code(&fellkit_env(&args, "-1")), 2);
    assert_eq!(code(&fellkit_env(&args, "abc")), 2);
}

#[test]
fn help_and_version_exit_zero() {
    let o = fellkit(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("generate"));
    assert_eq!(code(&fellkit(&["--version"])), 0);
}
