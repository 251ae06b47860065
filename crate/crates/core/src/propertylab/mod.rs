//! Monte Carlo experiments that probe non-explosion, escape, uniqueness,
//! comparison, non-contact, flow continuity and moment bounds, with
//! PASS / FAIL / INCONCLUSIVE verdicts.
//!
//! Every experiment is a pure function of its config: paths run in parallel
//! on the current rayon pool, results are collected in path order and
//! reduced by pairwise summation.

mod experiments;
mod suites;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coefficients::{CoefficientError, CoefficientModel, GaugeKind, ModelSpec, StateVector};
use crate::integrator::{IntegratorError, Scheme, SchemeConfig};
use crate::lyapunov::LyapunovError;
use crate::noise::{sample_noise, NoiseError, NoisePath, ScenarioSeed};
use crate::report::Verdict;
use crate::stats::{Estimate, LinearFit};

pub use experiments::{
    comparison_experiment, escape_experiment, flow_continuity_experiment, noncontact_experiment,
    nonexplosion_experiment, sup_moment_experiment, uniqueness_experiment,
};
pub use suites::{run_suite, suite_configs, Scale, SuiteEntry, SuiteReport, SUITES};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Coefficient(#[from] CoefficientError),
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
}

impl LabError {
    /// True for errors caused by the configuration rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            LabError::Config(_)
                | LabError::Coefficient(CoefficientError::Config(_))
                | LabError::Coefficient(CoefficientError::Parse(_))
                | LabError::Coefficient(CoefficientError::Dimension { .. })
                | LabError::Integrator(IntegratorError::Config(_))
                | LabError::Integrator(IntegratorError::Dimension { .. })
        )
    }
}

/// Experiment-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentKind {
    Nonexplosion {
        #[serde(default = "default_gauge")]
        gauge: GaugeKind,
        /// Number of equally spaced checkpoints for the Lyapunov moment.
        #[serde(default = "default_checkpoints")]
        checkpoints: usize,
    },
    Escape {
        r_inner: f64,
        /// Initial radii `|x0|`, increasing.
        ladder: Vec<f64>,
        #[serde(default = "default_gauge")]
        gauge: GaugeKind,
        /// Largest hitting probability accepted at the outermost radius.
        #[serde(default = "default_vanish_tol")]
        vanish_tol: f64,
    },
    Uniqueness {
        /// Decreasing steps; consecutive ratios must be integers.
        dt_ladder: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expected_order: Option<f64>,
        #[serde(default = "default_order_tol")]
        order_tol: f64,
    },
    Comparison {
        /// Upper model; `model` is the lower one.
        model2: Box<ModelSpec>,
        /// Initial value of the upper model.
        x0_2: Vec<f64>,
    },
    Noncontact {
        y: Vec<f64>,
        #[serde(default = "default_truncation")]
        truncation: Vec<f64>,
    },
    FlowContinuity {
        p: f64,
        /// Exponents `k` of the separations `2^-k`.
        #[serde(default = "default_flow_ladder")]
        ladder: Vec<i32>,
        #[serde(default = "default_slope_tol")]
        slope_tol: f64,
    },
    SupMoment {
        p: f64,
    },
}

fn default_gauge() -> GaugeKind {
    GaugeKind::LogEPlus
}
fn default_checkpoints() -> usize {
    11
}
fn default_vanish_tol() -> f64 {
    0.05
}
fn default_order_tol() -> f64 {
    0.3
}
fn default_truncation() -> Vec<f64> {
    vec![10.0, 100.0, 1000.0]
}
fn default_flow_ladder() -> Vec<i32> {
    (3..=10).collect()
}
fn default_slope_tol() -> f64 {
    0.2
}
fn default_paths() -> usize {
    1000
}
fn default_horizon() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_r_explode() -> f64 {
    1e6
}

/// A complete, self-describing experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelSpec,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_r_explode")]
    pub r_explode: f64,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Verdict a suite expects from this experiment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Verdict>,
    pub experiment: ExperimentKind,
}

impl ExperimentConfig {
    pub fn new(name: &str, model: ModelSpec, x0: Vec<f64>, experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            name: name.into(),
            model,
            paths: default_paths(),
            horizon: default_horizon(),
            dt: default_dt(),
            scheme: Scheme::default(),
            r_explode: default_r_explode(),
            x0,
            seed: 0,
            expected: None,
            experiment,
        }
    }

    pub fn with_paths(mut self, paths: usize) -> Self {
        self.paths = paths;
        self
    }

    pub fn with_horizon(mut self, t: f64) -> Self {
        self.horizon = t;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_r_explode(mut self, r: f64) -> Self {
        self.r_explode = r;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn expecting(mut self, v: Verdict) -> Self {
        self.expected = Some(v);
        self
    }

    pub fn kind_name(&self) -> &'static str {
        match self.experiment {
            ExperimentKind::Nonexplosion { .. } => "nonexplosion",
            ExperimentKind::Escape { .. } => "escape",
            ExperimentKind::Uniqueness { .. } => "uniqueness",
            ExperimentKind::Comparison { .. } => "comparison",
            ExperimentKind::Noncontact { .. } => "noncontact",
            ExperimentKind::FlowContinuity { .. } => "flow_continuity",
            ExperimentKind::SupMoment { .. } => "sup_moment",
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::Config(m));
        if self.paths < 100 {
            return bad(format!("paths must be at least 100, got {}", self.paths));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("T must be positive, got {}", self.horizon));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= self.horizon) {
            return bad(format!("dt must lie in (0, T], got {}", self.dt));
        }
        if !(self.r_explode > 0.0) {
            return bad(format!("r_explode must be positive, got {}", self.r_explode));
        }
        if self.x0.is_empty() || self.x0.iter().any(|v| !v.is_finite()) {
            return bad("x0 must be a non-empty finite vector".into());
        }
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(LabError::Config(format!("{name} must be positive, got {v}")))
            }
        };
        match &self.experiment {
            ExperimentKind::Nonexplosion { checkpoints, .. } => {
                if *checkpoints < 3 {
                    return bad("nonexplosion needs at least 3 checkpoints".into());
                }
            }
            ExperimentKind::Escape { r_inner, ladder, vanish_tol, .. } => {
                positive("r_inner", *r_inner)?;
                positive("vanish_tol", *vanish_tol)?;
                if ladder.len() < 2 || ladder.windows(2).any(|w| !(w[0] < w[1])) || ladder[0] <= *r_inner {
                    return bad("escape ladder must increase and start above r_inner".into());
                }
            }
            ExperimentKind::Uniqueness { dt_ladder, order_tol, .. } => {
                positive("order_tol", *order_tol)?;
                if dt_ladder.len() < 3 {
                    return bad("uniqueness needs at least three steps".into());
                }
                for w in dt_ladder.windows(2) {
                    let r = w[0] / w[1];
                    if !(r >= 2.0 - 1e-9 && (r - r.round()).abs() <= 1e-9 * r) {
                        return bad(format!("refinement mismatch: {} / {} is not an integer >= 2", w[0], w[1]));
                    }
                }
                if dt_ladder.iter().any(|d| !(d.is_finite() && *d > 0.0 && *d <= self.horizon)) {
                    return bad("dt_ladder entries must lie in (0, T]".into());
                }
            }
            ExperimentKind::Comparison { x0_2, .. } => {
                if x0_2.len() != self.x0.len() || x0_2.iter().any(|v| !v.is_finite()) {
                    return bad("x0_2 must match x0 in dimension".into());
                }
            }
            ExperimentKind::Noncontact { y, truncation } => {
                if y.len() != self.x0.len() || y.iter().any(|v| !v.is_finite()) {
                    return bad("y must match x0 in dimension".into());
                }
                if *y == self.x0 {
                    return bad("non-contact needs distinct initial points".into());
                }
                if truncation.is_empty() || truncation.iter().any(|n| !(n.is_finite() && *n > 0.0)) {
                    return bad("truncation levels must be positive".into());
                }
            }
            ExperimentKind::FlowContinuity { p, ladder, slope_tol } => {
                if !(p.is_finite() && *p > 2.0) {
                    return bad(format!("flow continuity needs p > 2, got {p}"));
                }
                positive("slope_tol", *slope_tol)?;
                if ladder.len() < 2 || ladder.windows(2).any(|w| w[0] >= w[1]) || ladder[0] < 0 {
                    return bad("flow ladder must be increasing non-negative exponents".into());
                }
            }
            ExperimentKind::SupMoment { p } => positive("p", *p)?,
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hash_json(self)
    }

    fn scheme_config(&self, dt: f64) -> SchemeConfig {
        SchemeConfig { scheme: self.scheme, r_explode: self.r_explode, dt, taming_exponent: 1.0 }
    }
}

/// SHA-256 hex digest of the compact JSON form of `v`.
pub fn hash_json<T: Serialize>(v: &T) -> String {
    let bytes = serde_json::to_vec(v).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// A reported mean with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Statistic {
    pub fn new(name: impl Into<String>, e: Estimate) -> Self {
        Statistic { name: name.into(), value: e.mean, std_error: e.std_error, n: e.n }
    }

    /// A deterministic quantity (zero standard error).
    pub fn exact(name: impl Into<String>, value: f64, n: usize) -> Self {
        Statistic { name: name.into(), value, std_error: 0.0, n }
    }
}

/// Fitted slope with a 95% normal-approximation interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedExponent {
    pub name: String,
    pub value: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

impl FittedExponent {
    fn from_fit(name: impl Into<String>, fit: Option<LinearFit>, points: usize) -> Self {
        let (value, se) = fit.map_or((f64::NAN, f64::NAN), |f| (f.slope, f.slope_std_error));
        FittedExponent {
            name: name.into(),
            value,
            std_error: se,
            ci_low: value - 1.96 * se,
            ci_high: value + 1.96 * se,
            points,
        }
    }
}

/// Per-ladder statistics, also written as CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Hypotheses hold; the verdict tests the property.
    Theorem,
    /// Hypotheses fail or cannot be certified; the run looks for a refutation.
    Refutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub paths: usize,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub experiment: String,
    pub model: String,
    pub mode: Mode,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Verdict>,
    /// The decision rule with the tolerances applied.
    pub criterion: String,
    pub statistics: Vec<Statistic>,
    pub fits: Vec<FittedExponent>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
    pub provenance: Provenance,
}

impl ExperimentReport {
    pub fn statistic(&self, name: &str) -> Option<&Statistic> {
        self.statistics.iter().find(|s| s.name == name)
    }

    pub fn fit(&self, name: &str) -> Option<&FittedExponent> {
        self.fits.iter().find(|s| s.name == name)
    }

    pub fn matches_expected(&self) -> bool {
        self.expected.is_none_or(|e| e == self.verdict)
    }
}

/// Working state shared by the experiment bodies.
pub(crate) struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub model: CoefficientModel,
    pub x0: StateVector,
}

impl<'a> Context<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self, LabError> {
        cfg.validate()?;
        let model = cfg.model.build()?;
        let x0 = StateVector::new(cfg.x0.clone())?;
        if x0.dim() != model.dim() {
            return Err(LabError::Config(format!(
                "x0 has dimension {} but the model has dimension {}",
                x0.dim(),
                model.dim()
            )));
        }
        Ok(Context { cfg, model, x0 })
    }

    pub fn noise(&self, path: u64, dt: f64) -> Result<NoisePath, LabError> {
        Ok(sample_noise(
            ScenarioSeed::new(self.cfg.seed, path),
            self.cfg.horizon,
            dt,
            self.model.brownian_dim(),
            self.model.marks(),
        )?)
    }

    pub fn scheme(&self) -> SchemeConfig {
        self.cfg.scheme_config(self.cfg.dt)
    }

    pub fn report(&self, mode: Mode, verdict: Verdict, criterion: String) -> ExperimentReport {
        ExperimentReport {
            name: self.cfg.name.clone(),
            experiment: self.cfg.kind_name().into(),
            model: self.model.name().into(),
            mode,
            verdict,
            expected: self.cfg.expected,
            criterion,
            statistics: Vec::new(),
            fits: Vec::new(),
            tables: Vec::new(),
            notes: Vec::new(),
            provenance: Provenance {
                config_hash: self.cfg.hash(),
                seed: self.cfg.seed,
                paths: self.cfg.paths,
                version: env!("CARGO_PKG_VERSION").into(),
            },
        }
    }
}

/// Run `f` for paths `0..n` on the current pool; output in path order.
pub(crate) fn par_paths<T, F>(n: usize, f: F) -> Result<Vec<T>, LabError>
where
    T: Send,
    F: Fn(u64) -> Result<T, LabError> + Sync + Send,
{
    (0..n as u64).into_par_iter().map(f).collect()
}

/// Run one experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, LabError> {
    match &cfg.experiment {
        ExperimentKind::Nonexplosion { .. } => nonexplosion_experiment(cfg),
        ExperimentKind::Escape { .. } => escape_experiment(cfg),
        ExperimentKind::Uniqueness { .. } => uniqueness_experiment(cfg),
        ExperimentKind::Comparison { .. } => comparison_experiment(cfg),
        ExperimentKind::Noncontact { .. } => noncontact_experiment(cfg),
        ExperimentKind::FlowContinuity { .. } => flow_continuity_experiment(cfg),
        ExperimentKind::SupMoment { .. } => sup_moment_experiment(cfg),
    }
}

/// Separation below this counts as contact.
pub fn contact_floor(initial_separation: f64) -> f64 {
    1e-9 * (1.0 + initial_separation)
}
