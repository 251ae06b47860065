//! Pinned experiment suites: the counterexample fixtures, which must fail
//! (or stay undecided) where the hypotheses break, and the positive
//! fixtures, which must pass.

use serde::{Deserialize, Serialize};

use super::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport, LabError};
use crate::coefficients::{BuiltinParams, JumpForm, MarkLaw, ModelSpec};
use crate::integrator::Scheme;
use crate::report::Verdict;

pub const SUITES: &[&str] = &["paper_counterexamples", "paper_theorems"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    /// Path counts used for acceptance.
    #[default]
    Full,
    /// Small path counts for quick checks.
    Smoke,
}

impl std::str::FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(Scale::Full),
            "smoke" => Ok(Scale::Smoke),
            other => Err(format!("unknown scale `{other}` (expected full or smoke)")),
        }
    }
}

fn canonical(name: &str) -> Option<&'static str> {
    match name {
        "paper_counterexamples" | "counterexamples" => Some("paper_counterexamples"),
        "paper_theorems" | "theorems" => Some("paper_theorems"),
        _ => None,
    }
}

fn params() -> BuiltinParams {
    BuiltinParams::default()
}

/// Log model with jumps `h = x u`, marks uniform on `[-1/2, 1/2]`.
fn log_linear() -> ModelSpec {
    ModelSpec::builtin("log_model").with_params(BuiltinParams { jump: Some(JumpForm::Linear), ..params() })
}

/// Log model with bounded additive jumps `h = u`.
fn log_additive() -> ModelSpec {
    ModelSpec::builtin("log_model").with_params(BuiltinParams { jump: Some(JumpForm::Additive), ..params() })
}

/// Log comparison pair: jumps `h = x u` with marks uniform on `[0, 1/2]`,
/// so `h` is nondecreasing in `x`; the lower model has drift shifted by -1.
fn comparison_pair() -> (ModelSpec, ModelSpec) {
    let base = BuiltinParams {
        jump: Some(JumpForm::Linear),
        marks: Some(MarkLaw::Uniform { low: 0.0, high: 0.5 }),
        ..params()
    };
    let lower = ModelSpec::builtin("log_model")
        .with_params(BuiltinParams { drift_shift: Some(-1.0), ..base.clone() })
        .with_name("log_model_shifted");
    (lower, ModelSpec::builtin("log_model").with_params(base))
}

/// Experiments of a suite at the given scale.
pub fn suite_configs(name: &str, scale: Scale, seed: u64) -> Result<Vec<ExperimentConfig>, LabError> {
    let name = canonical(name)
        .ok_or_else(|| LabError::Config(format!("unknown suite `{name}` (expected one of {})", SUITES.join(", "))))?;
    let big = |full: usize| match scale {
        Scale::Full => full,
        Scale::Smoke => 200,
    };
    let flow_ladder: Vec<i32> = (3..=10).collect();
    let cfgs = match name {
        "paper_counterexamples" => vec![
            ExperimentConfig::new(
                "flip_escape",
                ModelSpec::builtin("pure_jump_flip"),
                vec![1.0],
                ExperimentKind::Escape {
                    r_inner: 1.0,
                    ladder: vec![2.0, 8.0, 32.0, 128.0],
                    gauge: super::default_gauge(),
                    vanish_tol: 0.05,
                },
            )
            .with_paths(big(10_000))
            .with_dt(1e-2)
            .expecting(Verdict::Fail),
            ExperimentConfig::new(
                "flip_noncontact",
                ModelSpec::builtin("pure_jump_flip"),
                vec![1.0],
                ExperimentKind::Noncontact { y: vec![2.0], truncation: super::default_truncation() },
            )
            .with_paths(big(10_000))
            .with_dt(1e-2)
            .expecting(Verdict::Fail),
            ExperimentConfig::new(
                "double_flip_comparison",
                ModelSpec::builtin("pure_jump_double_flip"),
                vec![-1.0],
                ExperimentKind::Comparison {
                    model2: Box::new(ModelSpec::builtin("pure_jump_double_flip")),
                    x0_2: vec![1.0],
                },
            )
            .with_paths(big(10_000))
            .with_dt(1e-2)
            .expecting(Verdict::Fail),
            ExperimentConfig::new(
                "flip_flow_continuity",
                ModelSpec::builtin("pure_jump_flip"),
                vec![1.0],
                ExperimentKind::FlowContinuity { p: 3.0, ladder: flow_ladder.clone(), slope_tol: 0.2 },
            )
            .with_paths(big(10_000))
            .with_dt(1e-2)
            .expecting(Verdict::Inconclusive),
            // f = g = 0 at x = 1 and g is only 1/2-Hoelder there, so paths
            // that reach 1 are absorbed together until the next jump, which
            // moves them as one.
            ExperimentConfig::new(
                "log_noncontact_at_one",
                log_linear(),
                vec![1.5],
                ExperimentKind::Noncontact { y: vec![2.5], truncation: super::default_truncation() },
            )
            .with_paths(big(10_000))
            .with_dt(1e-3)
            .expecting(Verdict::Fail),
            ExperimentConfig::new(
                "quadratic_nonexplosion",
                ModelSpec::builtin("quadratic_drift"),
                vec![1.0],
                ExperimentKind::Nonexplosion { gauge: super::default_gauge(), checkpoints: 11 },
            )
            .with_paths(100)
            .with_horizon(1.1)
            .with_dt(1e-4)
            .with_scheme(Scheme::Euler)
            .expecting(Verdict::Fail),
            ExperimentConfig::new(
                "quadratic_sup_moment",
                ModelSpec::builtin("quadratic_drift"),
                vec![1.0],
                ExperimentKind::SupMoment { p: 2.0 },
            )
            .with_paths(100)
            .with_horizon(1.1)
            .with_dt(1e-4)
            .with_scheme(Scheme::Euler)
            .expecting(Verdict::Fail),
        ],
        _ => {
            let (lower, upper) = comparison_pair();
            vec![
                ExperimentConfig::new(
                    "log_nonexplosion",
                    ModelSpec::builtin("log_model"),
                    vec![1.5],
                    ExperimentKind::Nonexplosion { gauge: super::default_gauge(), checkpoints: 11 },
                )
                .with_paths(big(10_000))
                .with_horizon(2.0)
                .with_dt(1e-3)
                .with_scheme(Scheme::Euler)
                // The true solution passes 1e6 on about one path in a thousand by T = 2.
                .with_r_explode(1e30)
                .expecting(Verdict::Pass),
                ExperimentConfig::new(
                    "log_escape",
                    log_additive(),
                    vec![1.0],
                    ExperimentKind::Escape {
                        r_inner: 1.0,
                        ladder: vec![2.0, 8.0, 32.0, 128.0],
                        gauge: super::default_gauge(),
                        vanish_tol: 0.05,
                    },
                )
                .with_paths(big(10_000))
                .with_dt(1e-3)
                .expecting(Verdict::Pass),
                ExperimentConfig::new(
                    "log_uniqueness_drift",
                    ModelSpec::builtin("log_model").with_params(BuiltinParams {
                        jump: Some(JumpForm::None),
                        diffusion_scale: Some(0.0),
                        ..params()
                    }),
                    vec![1.5],
                    ExperimentKind::Uniqueness {
                        dt_ladder: (8..=13).map(|k| 2f64.powi(-k)).collect(),
                        expected_order: Some(2.0),
                        order_tol: 0.3,
                    },
                )
                .with_paths(big(1_000))
                .expecting(Verdict::Pass),
                ExperimentConfig::new(
                    "log_uniqueness_diffusion",
                    ModelSpec::builtin("log_model")
                        .with_params(BuiltinParams { jump: Some(JumpForm::None), ..params() }),
                    vec![3.0],
                    ExperimentKind::Uniqueness {
                        dt_ladder: (8..=13).map(|k| 2f64.powi(-k)).collect(),
                        expected_order: Some(1.0),
                        order_tol: 0.3,
                    },
                )
                .with_paths(big(1_000))
                .with_horizon(0.25)
                .expecting(Verdict::Pass),
                ExperimentConfig::new(
                    "log_comparison",
                    lower,
                    vec![2.9],
                    ExperimentKind::Comparison { model2: Box::new(upper), x0_2: vec![3.0] },
                )
                .with_paths(big(10_000))
                .with_dt(1e-3)
                .expecting(Verdict::Pass),
                ExperimentConfig::new(
                    "log_noncontact",
                    log_linear(),
                    vec![10.0],
                    ExperimentKind::Noncontact { y: vec![11.0], truncation: super::default_truncation() },
                )
                .with_paths(big(10_000))
                .with_horizon(0.25)
                .with_dt(1e-3)
                .expecting(Verdict::Pass),
                ExperimentConfig::new(
                    "log_flow_continuity",
                    log_additive().with_cutoff(5.0),
                    vec![1.5],
                    ExperimentKind::FlowContinuity { p: 3.0, ladder: flow_ladder, slope_tol: 0.2 },
                )
                .with_paths(big(10_000))
                .with_dt(1e-3)
                .expecting(Verdict::Pass),
                ExperimentConfig::new(
                    "log_sup_moment",
                    log_additive().with_cutoff(5.0),
                    vec![1.5],
                    ExperimentKind::SupMoment { p: 4.0 },
                )
                .with_paths(big(10_000))
                .with_dt(1e-3)
                .expecting(Verdict::Pass),
            ]
        }
    };
    Ok(cfgs.into_iter().map(|c| c.with_seed(seed)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub expected: Verdict,
    pub verdict: Verdict,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub scale: Scale,
    pub seed: u64,
    /// PASS iff every experiment returned its expected verdict.
    pub verdict: Verdict,
    pub entries: Vec<SuiteEntry>,
    pub reports: Vec<ExperimentReport>,
}

pub fn run_suite(name: &str, scale: Scale, seed: u64) -> Result<SuiteReport, LabError> {
    let cfgs = suite_configs(name, scale, seed)?;
    let mut entries = Vec::with_capacity(cfgs.len());
    let mut reports = Vec::with_capacity(cfgs.len());
    for cfg in &cfgs {
        let rep = run_experiment(cfg)?;
        let expected = cfg.expected.unwrap_or(Verdict::Pass);
        entries.push(SuiteEntry {
            name: cfg.name.clone(),
            expected,
            verdict: rep.verdict,
            matches: rep.verdict == expected,
        });
        reports.push(rep);
    }
    let verdict = Verdict::from_bool(entries.iter().all(|e| e.matches));
    Ok(SuiteReport { suite: canonical(name).unwrap_or(name).to_string(), scale, seed, verdict, entries, reports })
}
