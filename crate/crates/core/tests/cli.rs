//! Command-line behaviour: artifacts, manifests, precedence and exit codes.

use std::fs;
use std::path::Path;
use std::process::Command;

use jumpsde::cli::{run_with, Manifest};
use sha2::{Digest, Sha256};
use tempfile::TempDir;

type Env<'a> = &'a dyn Fn(&str) -> Option<String>;

fn no_env(_: &str) -> Option<String> {
    None
}

fn run(args: &[&str], env: Env) -> i32 {
    run_with(std::iter::once("jumpsde").chain(args.iter().copied()), env)
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn simulate_writes_hashed_artifacts_and_reruns_identically() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let args = ["simulate", "--model", "log_model", "--x0", "1.5", "--T", "0.5", "--dt", "0.01", "--seed", "9"];
        let code = run(&[&args[..], &["--out", &out_arg(dir)]].concat(), &no_env);
        assert_eq!(code, 0);
    }
    let m = manifest(&a);
    assert_eq!(m.command, "simulate");
    assert_eq!(m.seed, 9);
    let names: Vec<&str> = m.outputs.iter().map(|o| o.path.as_str()).collect();
    assert_eq!(names, ["simulation.json", "trajectory.csv"]);
    for o in &m.outputs {
        let data = fs::read(a.join(&o.path)).unwrap();
        assert_eq!(o.bytes, data.len() as u64);
        assert_eq!(o.sha256, hex::encode(Sha256::digest(&data)));
        assert_eq!(data, fs::read(b.join(&o.path)).unwrap(), "{} differs between reruns", o.path);
    }
    let csv = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x0"), "header: {}", csv.lines().next().unwrap());
    // Header, 51 grid points, plus one row per jump.
    assert!(csv.lines().count() >= 52);
}

#[test]
fn seed_precedence_is_flag_then_env_then_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"schema_version": 1, "seed": 3, "simulate": {"model": {"builtin": "zero"}, "x0": [1.0], "T": 0.1, "dt": 0.05}}"#)
        .unwrap();
    let env = |k: &str| (k == "JUMPSDE_SEED").then(|| "5".to_string());
    let cases: [(&[&str], Env, u64); 3] = [(&["--seed", "7"], &env, 7), (&[], &env, 5), (&[], &no_env, 3)];
    for (i, (extra, env, expect)) in cases.into_iter().enumerate() {
        let out = tmp.path().join(format!("o{i}"));
        let dir = out_arg(&out);
        let args = [&["simulate", "--config", cfg.to_str().unwrap(), "--out", &dir], extra].concat();
        assert_eq!(run(&args, env), 0);
        assert_eq!(manifest(&out).seed, expect);
    }
}

#[test]
fn manifest_rerun_reproduces_the_report_for_any_worker_count() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    let code = run(
        &["experiment", "--name", "log_comparison", "--paths", "300", "--workers", "1", "--out", &out_arg(&first)],
        &no_env,
    );
    assert_eq!(code, 0);
    let m1 = manifest(&first);
    let mpath = first.join("manifest.json");
    for (i, workers) in ["3", "8"].iter().enumerate() {
        let again = tmp.path().join(format!("again{i}"));
        let args = ["experiment", "--config", mpath.to_str().unwrap(), "--workers", workers, "--out", &out_arg(&again)];
        assert_eq!(run(&args, &no_env), 0);
        assert_eq!(fs::read(first.join("report.json")).unwrap(), fs::read(again.join("report.json")).unwrap());
        assert_eq!(manifest(&again).config_hash, m1.config_hash);
    }
    let env = |k: &str| (k == "JUMPSDE_WORKERS").then(|| "2".to_string());
    let viaenv = tmp.path().join("env");
    let args = ["experiment", "--config", mpath.to_str().unwrap(), "--out", &out_arg(&viaenv)];
    assert_eq!(run(&args, &env), 0);
    assert_eq!(fs::read(first.join("report.json")).unwrap(), fs::read(viaenv.join("report.json")).unwrap());
}

#[test]
fn tampered_manifest_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    let code = run(&["suite", "--name", "counterexamples", "--scale", "smoke", "--out", &out_arg(&first)], &no_env);
    assert_eq!(code, 0);
    let text = fs::read_to_string(first.join("manifest.json")).unwrap();
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, text.replace("\"smoke\"", "\"full\"")).unwrap();
    let args = ["suite", "--config", bad.to_str().unwrap(), "--out", &out_arg(&tmp.path().join("x"))];
    assert_eq!(run(&args, &no_env), 1);
}

#[test]
fn certify_exit_codes_follow_the_verdict() {
    let tmp = TempDir::new().unwrap();
    let cases = [
        (&["--model", "log_model", "--assumption", "log-lipschitz"][..], 0),
        (&["--model", "pure_jump_flip", "--assumption", "jump-homeomorphism"][..], 2),
        (&["--model", "quadratic_drift", "--assumption", "growth"][..], 2),
    ];
    for (i, (args, expect)) in cases.into_iter().enumerate() {
        let out = tmp.path().join(format!("c{i}"));
        let dir = out_arg(&out);
        let full = [&["certify"], args, &["--out", &dir]].concat();
        assert_eq!(run(&full, &no_env), expect, "{args:?}");
        assert!(out.join("certificate.json").exists());
    }
}

#[test]
fn configuration_errors_exit_with_one() {
    let tmp = TempDir::new().unwrap();
    let out = out_arg(&tmp.path().join("o"));
    let unknown = tmp.path().join("unknown.json");
    fs::write(
        &unknown,
        r#"{"schema_version": 1, "simulate": {"model": {"builtin": "zero"}, "x0": [1.0], "bogus": 1}}"#,
    )
    .unwrap();
    let wrong_type = tmp.path().join("type.json");
    fs::write(&wrong_type, r#"{"schema_version": 1, "simulate": {"model": {"builtin": "zero"}, "x0": "one"}}"#)
        .unwrap();
    let two = tmp.path().join("two.json");
    fs::write(&two, r#"{"schema_version": 1, "suite": {"name": "theorems"}, "simulate": {"model": {"builtin": "zero"}, "x0": [1.0]}}"#).unwrap();
    let bad_seed = |k: &str| (k == "JUMPSDE_SEED").then(|| "minus one".to_string());
    let cases: Vec<(Vec<&str>, Env)> = vec![
        (vec!["simulate", "--config", unknown.to_str().unwrap()], &no_env),
        (vec!["simulate", "--config", wrong_type.to_str().unwrap()], &no_env),
        (vec!["suite", "--config", two.to_str().unwrap()], &no_env),
        (vec!["simulate", "--x0", "1"], &no_env),
        (vec!["simulate", "--model", "nope", "--x0", "1"], &no_env),
        (vec!["simulate", "--model", "zero", "--x0", "1", "--dt=-1"], &no_env),
        (vec!["suite", "--name", "nope"], &no_env),
        (vec!["experiment", "--name", "no_such_fixture"], &no_env),
        (vec!["suite", "--name", "theorems", "--scale", "smoke"], &bad_seed),
        (vec!["frobnicate"], &no_env),
        (vec!["simulate", "--seed", "x"], &no_env),
    ];
    for (args, env) in cases {
        let full = [&args[..], &["--out", &out]].concat();
        assert_eq!(run(&full, env), 1, "{args:?}");
    }
}

#[test]
fn failing_experiment_exits_with_two() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let code =
        run(&["experiment", "--name", "double_flip_comparison", "--scale", "smoke", "--out", &out_arg(&out)], &no_env);
    assert_eq!(code, 2);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "FAIL");
    for table in report["tables"].as_array().unwrap() {
        assert!(out.join(format!("{}.csv", table["name"].as_str().unwrap())).exists());
    }
}

#[test]
fn binary_runs_a_smoke_suite() {
    let tmp = TempDir::new().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_jumpsde"))
        .args(["suite", "--name", "counterexamples", "--scale", "smoke", "--workers", "2", "--out"])
        .arg(tmp.path())
        .env_remove("JUMPSDE_SEED")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let suite: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("suite.json")).unwrap()).unwrap();
    assert_eq!(suite["suite"], "paper_counterexamples");

    let help = Command::new(env!("CARGO_BIN_EXE_jumpsde")).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
    let bad = Command::new(env!("CARGO_BIN_EXE_jumpsde")).arg("simulate").arg("--bogus").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}
