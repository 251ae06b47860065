//! End-to-end checks of the experiment runners and the pinned suites.

use jumpsde::coefficients::{BuiltinParams, JumpForm, MarkLaw, ModelSpec};
use jumpsde::propertylab::{
    run_experiment, run_suite, suite_configs, ExperimentConfig, ExperimentKind, ExperimentReport, LabError, Scale,
};
use jumpsde::report::Verdict;

fn suite_fixture(suite: &str, name: &str) -> ExperimentConfig {
    suite_configs(suite, Scale::Full, 0).unwrap().into_iter().find(|c| c.name == name).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn bytes(r: &ExperimentReport) -> Vec<u8> {
    serde_json::to_vec(r).unwrap()
}

#[test]
fn reports_are_deterministic_and_independent_of_threads() {
    let cfg = suite_fixture("paper_theorems", "log_comparison").with_paths(300);
    let one = in_pool(1, || run_experiment(&cfg).unwrap());
    let again = in_pool(1, || run_experiment(&cfg).unwrap());
    let four = in_pool(4, || run_experiment(&cfg).unwrap());
    assert_eq!(bytes(&one), bytes(&again));
    assert_eq!(bytes(&one), bytes(&four));
    assert_eq!(one.provenance.config_hash, cfg.hash());
}

#[test]
fn seed_changes_the_sample() {
    let cfg = suite_fixture("paper_counterexamples", "flip_noncontact").with_paths(300);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg.clone().with_seed(1)).unwrap();
    assert_ne!(a.statistic("contact_fraction").unwrap().value, b.statistic("contact_fraction").unwrap().value);
}

#[test]
fn counterexample_suite_matches_at_smoke_scale() {
    let rep = run_suite("counterexamples", Scale::Smoke, 0).unwrap();
    assert_eq!(rep.suite, "paper_counterexamples");
    for e in &rep.entries {
        assert!(e.matches, "{}: expected {:?}, got {:?}", e.name, e.expected, e.verdict);
        assert_ne!(e.expected, Verdict::Pass, "{} is a counterexample", e.name);
    }
    assert_eq!(rep.verdict, Verdict::Pass);
}

#[test]
fn every_fixture_validates() {
    for suite in ["paper_counterexamples", "paper_theorems"] {
        for scale in [Scale::Full, Scale::Smoke] {
            for cfg in suite_configs(suite, scale, 7).unwrap() {
                cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
                assert_eq!(cfg.seed, 7);
                assert!(cfg.expected.is_some());
            }
        }
    }
    assert!(suite_configs("nope", Scale::Smoke, 0).is_err());
}

#[test]
fn flip_contact_fraction_matches_first_jump_probability() {
    let rep = run_experiment(&suite_fixture("paper_counterexamples", "flip_noncontact").with_paths(4000)).unwrap();
    let s = rep.statistic("contact_fraction").unwrap();
    let p = 1.0 - (-1f64).exp();
    assert!((s.value - p).abs() <= 3.0 * s.std_error, "contact {} +- {}", s.value, s.std_error);
    assert_eq!(rep.verdict, Verdict::Fail);
}

#[test]
fn escape_probabilities_stay_below_the_lyapunov_bound() {
    let rep = run_experiment(&suite_fixture("paper_theorems", "log_escape").with_paths(2000)).unwrap();
    let table = rep.tables.iter().find(|t| t.name == "escape").unwrap();
    for row in &table.rows {
        let (r, p, se, bound) = (row[0], row[1], row[2], row[3]);
        assert!(p - 3.0 * se <= bound, "radius {r}: probability {p} above bound {bound}");
        assert!((0.0..=1.0).contains(&bound));
    }
    assert_eq!(rep.verdict, Verdict::Pass);
}

#[test]
fn verdicts_do_not_flip_with_path_count() {
    for (suite, name) in [("paper_counterexamples", "double_flip_comparison"), ("paper_theorems", "log_comparison")] {
        let base = suite_fixture(suite, name);
        let small = run_experiment(&base.clone().with_paths(200)).unwrap();
        let large = run_experiment(&base.clone().with_paths(2000)).unwrap();
        assert_eq!(small.verdict, large.verdict, "{name}");
        assert_eq!(Some(large.verdict), base.expected, "{name}");
    }
}

#[test]
fn invalid_configs_are_config_errors() {
    let base = suite_fixture("paper_theorems", "log_noncontact");
    let cases = [
        base.clone().with_paths(10),
        base.clone().with_dt(0.0),
        base.clone().with_dt(2.0),
        base.clone().with_horizon(f64::NAN),
        ExperimentConfig { x0: vec![], ..base.clone() },
        ExperimentConfig { x0: vec![1.0, 2.0], ..base.clone() },
        ExperimentConfig {
            experiment: ExperimentKind::Noncontact { y: vec![10.0], truncation: vec![10.0] },
            ..base.clone()
        },
        ExperimentConfig {
            experiment: ExperimentKind::Uniqueness {
                dt_ladder: vec![0.1, 0.03, 0.01],
                expected_order: None,
                order_tol: 0.3,
            },
            ..base.clone()
        },
        ExperimentConfig {
            experiment: ExperimentKind::FlowContinuity { p: 2.0, ladder: vec![3, 4], slope_tol: 0.2 },
            ..base.clone()
        },
        ExperimentConfig { model: ModelSpec::builtin("no_such_model"), ..base.clone() },
        ExperimentConfig {
            model: ModelSpec::builtin("log_model").with_params(BuiltinParams {
                marks: Some(MarkLaw::Uniform { low: 1.0, high: 0.0 }),
                ..Default::default()
            }),
            ..base.clone()
        },
    ];
    for cfg in cases {
        let err: LabError = run_experiment(&cfg).expect_err(&cfg.name);
        assert!(err.is_config(), "{err}");
    }
}

#[test]
fn configs_round_trip_through_json() {
    for cfg in suite_configs("paper_theorems", Scale::Full, 3).unwrap() {
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }
    let unknown = r#"{"name":"x","model":{"builtin":"zero"},"x0":[1.0],"bogus":1,
        "experiment":{"kind":"sup_moment","p":2.0}}"#;
    assert!(serde_json::from_str::<ExperimentConfig>(unknown).is_err());
}

#[test]
fn linear_jump_log_model_keeps_distant_starts_apart() {
    let cfg = suite_fixture("paper_theorems", "log_noncontact").with_paths(1000);
    let rep = run_experiment(&cfg).unwrap();
    assert_eq!(rep.statistic("contact_fraction").unwrap().value, 0.0);
    let jump = BuiltinParams { jump: Some(JumpForm::Linear), ..Default::default() };
    assert_eq!(cfg.model, ModelSpec::builtin("log_model").with_params(jump));
}
