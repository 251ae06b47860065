//! Drives the C ABI from Rust the way a C caller would.

use std::ffi::{CStr, CString};
use std::ptr;

use jumpsde_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(jsd_last_error()) }.to_string_lossy().into_owned()
}

fn builtin(name: &str) -> *mut JsdModel {
    let name = CString::new(name).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { jsd_model_builtin(name.as_ptr(), &mut model) }, JsdStatus::Ok);
    assert!(!model.is_null());
    model
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(jsd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn builtin_model_evaluates() {
    let model = builtin("log_model");
    unsafe {
        assert_eq!(jsd_model_dim(model), 1);
        assert_eq!(jsd_model_brownian_dim(model), 1);
        let x = [std::f64::consts::E];
        let (mut f, mut g, mut c) = ([0.0], [0.0], [f64::NAN]);
        let status = jsd_model_eval(model, x.as_ptr(), 1, f.as_mut_ptr(), g.as_mut_ptr(), c.as_mut_ptr());
        assert_eq!(status, JsdStatus::Ok);
        assert!((f[0] - x[0]).abs() < 1e-15);
        assert!((g[0] - x[0]).abs() < 1e-15);
        // Default marks are centred, so the compensator vanishes.
        assert_eq!(c[0], 0.0);
        assert_eq!(
            jsd_model_eval(model, x.as_ptr(), 1, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()),
            JsdStatus::Ok
        );
        assert_eq!(
            jsd_model_eval(model, x.as_ptr(), 2, f.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()),
            JsdStatus::Config
        );
        jsd_model_free(model);
    }
}

#[test]
fn model_from_json_and_its_errors() {
    let good = CString::new(r#"{"builtin": "pure_jump_linear", "params": {"a": 0.5}}"#).unwrap();
    let bad = CString::new(r#"{"builtin": "pure_jump_linear"}"#).unwrap();
    let junk = CString::new("{not json").unwrap();
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(jsd_model_from_json(good.as_ptr(), &mut model), JsdStatus::Ok);
        jsd_model_free(model);
        model = ptr::null_mut();
        assert_eq!(jsd_model_from_json(bad.as_ptr(), &mut model), JsdStatus::Config);
        assert!(last_error().contains("needs `a`"), "{}", last_error());
        assert!(model.is_null());
        assert_eq!(jsd_model_from_json(junk.as_ptr(), &mut model), JsdStatus::Config);
        assert_eq!(jsd_model_from_json(ptr::null(), &mut model), JsdStatus::NullPointer);
        assert_eq!(jsd_model_builtin(good.as_ptr(), ptr::null_mut()), JsdStatus::NullPointer);
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(jsd_model_builtin(invalid.as_ptr().cast(), &mut model), JsdStatus::InvalidUtf8);
        jsd_model_free(ptr::null_mut());
    }
}

#[test]
fn simulate_and_copy_out_the_path() {
    let model = builtin("pure_jump_flip");
    let x0 = [2.0];
    unsafe {
        let mut traj = ptr::null_mut();
        let status = jsd_simulate(model, x0.as_ptr(), 1, 1.0, 0.1, JsdScheme::TamedEuler, 1e6, 4, 0, &mut traj);
        assert_eq!(status, JsdStatus::Ok, "{}", last_error());
        let n = jsd_trajectory_len(traj);
        assert_eq!(jsd_trajectory_dim(traj), 1);
        assert!(n >= 11);
        let mut times = vec![0.0; n];
        let mut states = vec![0.0; n];
        assert_eq!(jsd_trajectory_times(traj, times.as_mut_ptr(), n), JsdStatus::Ok);
        assert_eq!(jsd_trajectory_states(traj, states.as_mut_ptr(), n), JsdStatus::Ok);
        assert_eq!(times[0], 0.0);
        assert_eq!(*times.last().unwrap(), 1.0);
        assert_eq!(states[0], 2.0);
        // The flip path is 2 until the first jump and 0 after it.
        let k = states.iter().position(|s| *s == 0.0).unwrap_or(n);
        assert!(states[..k].iter().all(|s| *s == 2.0) && states[k..].iter().all(|s| *s == 0.0));

        assert_eq!(jsd_trajectory_times(traj, times.as_mut_ptr(), n - 1), JsdStatus::BufferTooSmall);
        assert!(last_error().contains(&format!("needs {n} entries")));
        assert_eq!(jsd_trajectory_states(traj, ptr::null_mut(), n), JsdStatus::NullPointer);
        let mut t = -1.0;
        assert_eq!(jsd_trajectory_explosion(traj, &mut t), 0);
        assert_eq!(t, -1.0);

        let mut again = ptr::null_mut();
        jsd_simulate(model, x0.as_ptr(), 1, 1.0, 0.1, JsdScheme::TamedEuler, 1e6, 4, 0, &mut again);
        let mut states2 = vec![0.0; n];
        assert_eq!(jsd_trajectory_len(again), n);
        jsd_trajectory_states(again, states2.as_mut_ptr(), n);
        assert_eq!(states, states2);

        jsd_trajectory_free(traj);
        jsd_trajectory_free(again);
        jsd_model_free(model);
    }
}

#[test]
fn explosion_is_reported() {
    let model = builtin("quadratic_drift");
    unsafe {
        let mut traj = ptr::null_mut();
        let status = jsd_simulate(model, [1.0].as_ptr(), 1, 1.5, 1e-4, JsdScheme::Euler, 1e6, 0, 0, &mut traj);
        assert_eq!(status, JsdStatus::Ok);
        let mut t = 0.0;
        assert_eq!(jsd_trajectory_explosion(traj, &mut t), 1);
        assert!((0.9..=1.05).contains(&t), "explosion at {t}");
        assert_eq!(jsd_trajectory_explosion(ptr::null(), &mut t), 0);
        jsd_trajectory_free(traj);

        let mut traj = ptr::null_mut();
        let bad = jsd_simulate(model, [1.0].as_ptr(), 1, 1.0, -1.0, JsdScheme::Euler, 1e6, 0, 0, &mut traj);
        assert_eq!(bad, JsdStatus::Config);
        assert!(traj.is_null());
        assert!(!last_error().is_empty());
        jsd_model_free(model);
    }
}

#[test]
fn experiment_and_suite_from_c() {
    let cfg = CString::new(
        r#"{"name": "flip", "model": {"builtin": "pure_jump_flip"}, "x0": [1.0], "paths": 400, "dt": 0.01,
            "experiment": {"kind": "noncontact", "y": [2.0]}}"#,
    )
    .unwrap();
    unsafe {
        let mut report = ptr::null_mut();
        let mut verdict = JsdVerdict::Pass;
        assert_eq!(jsd_run_experiment(cfg.as_ptr(), &mut report, &mut verdict), JsdStatus::Ok, "{}", last_error());
        assert_eq!(verdict, JsdVerdict::Fail);
        let json: serde_json::Value = serde_json::from_str(CStr::from_ptr(report).to_str().unwrap()).unwrap();
        assert_eq!(json["verdict"], "FAIL");
        assert_eq!(json["provenance"]["paths"], 400);
        jsd_string_free(report);

        let bad = CString::new(r#"{"name": "x"}"#).unwrap();
        let mut report = ptr::null_mut();
        assert_eq!(jsd_run_experiment(bad.as_ptr(), &mut report, ptr::null_mut()), JsdStatus::Config);
        assert!(report.is_null());
        assert_eq!(jsd_run_experiment(cfg.as_ptr(), ptr::null_mut(), ptr::null_mut()), JsdStatus::NullPointer);

        let name = CString::new("counterexamples").unwrap();
        let mut report = ptr::null_mut();
        assert_eq!(jsd_run_suite(name.as_ptr(), 1, 0, &mut report, &mut verdict), JsdStatus::Ok);
        assert_eq!(verdict, JsdVerdict::Pass);
        jsd_string_free(report);
        let name = CString::new("nope").unwrap();
        assert_eq!(jsd_run_suite(name.as_ptr(), 1, 0, &mut report, &mut verdict), JsdStatus::Config);
        jsd_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/jumpsde.h");
    let source = include_str!("../src/lib.rs");
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 18);
    for f in exports {
        let declared = header.match_indices(&format!("{f}(")).any(|(i, _)| matches!(&header[i - 1..i], " " | "*"));
        assert!(declared, "{f} missing from the header");
    }
    for item in ["JSD_STATUS_OK", "JSD_STATUS_BUFFER_TOO_SMALL", "JSD_VERDICT_FAIL", "typedef struct JsdModel JsdModel"]
    {
        assert!(header.contains(item), "{item} missing from the header");
    }
}
