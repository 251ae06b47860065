//! Command-line front end: `simulate`, `certify`, `experiment` and `suite`.
//!
//! A run is described by a versioned JSON [`RunConfig`] whose fields the
//! flags override. Every run writes its artifacts plus `manifest.json` into
//! the output directory; passing that manifest back through `--config`
//! repeats the run.
//!
//! Exit codes: 0 PASS (or no verdict), 1 config or usage error, 2 FAIL,
//! 3 INCONCLUSIVE, 4 runtime error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coefficients::{
    check_growth_assumption, check_jump_homeomorphism, check_log_lipschitz, CoefficientError, GrowthGauge,
    GrowthSampleSpec, HomeoSampleSpec, ModelSpec, PairSampler, StateVector,
};
use crate::integrator::{simulate, Explosion, Scheme, SchemeConfig};
use crate::noise::{sample_noise, ScenarioSeed};
use crate::propertylab::{
    hash_json, run_experiment, run_suite, suite_configs, ExperimentConfig, LabError, Scale, SUITES,
};
use crate::report::Verdict;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;
pub const SEED_ENV: &str = "JUMPSDE_SEED";
pub const WORKERS_ENV: &str = "JUMPSDE_WORKERS";
pub const DEFAULT_OUT: &str = "jumpsde-out";

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<CoefficientError> for CliError {
    fn from(e: CoefficientError) -> Self {
        LabError::from(e).into()
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

/// Top-level run description; exactly one command section is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandName {
    Simulate,
    Certify,
    Experiment,
    Suite,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Simulate => "simulate",
            CommandName::Certify => "certify",
            CommandName::Experiment => "experiment",
            CommandName::Suite => "suite",
        }
    }
}

impl RunConfig {
    fn empty() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: None,
            workers: None,
            out: None,
            simulate: None,
            certify: None,
            experiment: None,
            suite: None,
        }
    }

    /// The single command section present.
    pub fn command(&self) -> Result<CommandName, CliError> {
        let present: Vec<CommandName> = [
            (self.simulate.is_some(), CommandName::Simulate),
            (self.certify.is_some(), CommandName::Certify),
            (self.experiment.is_some(), CommandName::Experiment),
            (self.suite.is_some(), CommandName::Suite),
        ]
        .into_iter()
        .filter_map(|(on, c)| on.then_some(c))
        .collect();
        match present.as_slice() {
            [c] => Ok(*c),
            [] => Err(config_err("config has no command section (simulate, certify, experiment or suite)")),
            many => Err(config_err(format!(
                "config has {} command sections ({}); exactly one is allowed",
                many.len(),
                many.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    /// Hash of everything that determines the results; `workers` and `out`
    /// are excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.workers = None;
        c.out = None;
        hash_json(&c)
    }
}

fn default_horizon() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_sim_paths() -> usize {
    1
}
fn default_r_explode() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub model: ModelSpec,
    pub x0: Vec<f64>,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_sim_paths")]
    pub paths: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_r_explode")]
    pub r_explode: f64,
}

/// Coefficient hypothesis checked by `certify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    #[serde(alias = "2.1")]
    Growth,
    #[serde(alias = "log-lipschitz", alias = "3.1")]
    LogLipschitz,
    #[serde(alias = "jump-homeomorphism", alias = "4.1")]
    JumpHomeomorphism,
}

impl FromStr for Assumption {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "growth" | "2.1" => Ok(Assumption::Growth),
            "log-lipschitz" | "log_lipschitz" | "3.1" => Ok(Assumption::LogLipschitz),
            "jump-homeomorphism" | "jump_homeomorphism" | "4.1" => Ok(Assumption::JumpHomeomorphism),
            other => {
                Err(format!("unknown assumption `{other}` (expected growth, log-lipschitz or jump-homeomorphism)"))
            }
        }
    }
}

fn default_n_list() -> Vec<f64> {
    vec![10.0, 100.0, 1000.0]
}
fn default_p_list() -> Vec<f64> {
    vec![1.0, 2.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    pub model: ModelSpec,
    pub assumption: Assumption,
    /// Growth gauge; `log(e + s)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GrowthGauge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_sample: Option<GrowthSampleSpec>,
    #[serde(rename = "N", default = "default_n_list")]
    pub n_list: Vec<f64>,
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<PairSampler>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub homeomorphism: Option<HomeoSampleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub name: String,
    #[serde(default)]
    pub scale: Scale,
}

/// Written next to the artifacts of every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            config_err(format!("{what}: {inner}"))
        } else {
            config_err(format!("{what}: field `{path}`: {inner}"))
        }
    })
}

/// Parse a run config, or a manifest whose embedded config is returned
/// after its hash is checked.
pub fn load_config(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    let probe: serde_json::Value =
        serde_json::from_str(text).map_err(|e| config_err(format!("{origin}: invalid JSON: {e}")))?;
    let cfg = if probe.get("manifest_version").is_some() {
        let m: Manifest = parse_json(text, origin)?;
        if m.manifest_version != MANIFEST_VERSION {
            return Err(config_err(format!(
                "{origin}: manifest_version {} is not supported (expected {MANIFEST_VERSION})",
                m.manifest_version
            )));
        }
        if m.config.hash() != m.config_hash {
            return Err(config_err(format!("{origin}: config_hash does not match the embedded config")));
        }
        m.config
    } else {
        parse_json::<RunConfig>(text, origin)?
    };
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(config_err(format!(
            "{origin}: field `schema_version`: version {} is not supported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    cfg.command()?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Flags
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(name = "jumpsde", version, about = "Simulate jump SDEs and check their pathwise properties")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trajectories and write them as CSV.
    Simulate(SimulateArgs),
    /// Check a coefficient hypothesis on samples and write a certificate.
    Certify(CertifyArgs),
    /// Run one experiment from a config or a pinned suite fixture.
    Experiment(ExperimentArgs),
    /// Run a pinned suite of experiments.
    Suite(SuiteArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run config or manifest (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; takes precedence over JUMPSDE_SEED and the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; takes precedence over JUMPSDE_WORKERS and the config.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Builtin model name, or an inline JSON model spec.
    #[arg(long)]
    pub model: Option<String>,
    /// Time horizon.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Base step size of the time grid.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Initial state, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of independent paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// `euler` or `tamed_euler`.
    #[arg(long)]
    pub scheme: Option<String>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Builtin model name, or an inline JSON model spec.
    #[arg(long)]
    pub model: Option<String>,
    /// growth, log-lipschitz or jump-homeomorphism.
    #[arg(long)]
    pub assumption: Option<String>,
    /// Levels N for the log-Lipschitz fit, comma separated.
    #[arg(long = "N", value_delimiter = ',')]
    pub n_list: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Name of a suite fixture to run instead of a config.
    #[arg(long)]
    pub name: Option<String>,
    /// Scale of the fixture named by `--name`: full or smoke.
    #[arg(long)]
    pub scale: Option<String>,
    #[arg(long)]
    pub paths: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// paper_counterexamples or paper_theorems.
    #[arg(long)]
    pub name: Option<String>,
    /// full or smoke.
    #[arg(long)]
    pub scale: Option<String>,
}

fn parse_model(s: &str) -> Result<ModelSpec, CliError> {
    if s.trim_start().starts_with('{') {
        parse_json(s, "--model")
    } else {
        Ok(ModelSpec::builtin(s))
    }
}

fn parse_scale(s: &str) -> Result<Scale, CliError> {
    Scale::from_str(s).map_err(config_err)
}

fn parse_scheme(s: &str) -> Result<Scheme, CliError> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| config_err(format!("unknown scheme `{s}` (expected euler or tamed_euler)")))
}

fn parse_env<T: FromStr>(env: &dyn Fn(&str) -> Option<String>, key: &str) -> Result<Option<T>, CliError> {
    match env(key) {
        None => Ok(None),
        Some(v) if v.trim().is_empty() => Ok(None),
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| config_err(format!("environment variable {key}=`{v}` is not a valid value"))),
    }
}

fn apply_model_args(
    args: &ModelArgs,
    model: &mut ModelSpec,
    x0: &mut Vec<f64>,
    horizon: &mut f64,
    dt: &mut f64,
) -> Result<(), CliError> {
    if let Some(m) = &args.model {
        *model = parse_model(m)?;
    }
    if let Some(v) = &args.x0 {
        *x0 = v.clone();
    }
    if let Some(t) = args.horizon {
        *horizon = t;
    }
    if let Some(d) = args.dt {
        *dt = d;
    }
    Ok(())
}

fn find_fixture(name: &str, scale: Scale, seed: u64) -> Result<ExperimentConfig, CliError> {
    for suite in SUITES {
        if let Some(cfg) = suite_configs(suite, scale, seed)?.into_iter().find(|c| c.name == name) {
            return Ok(cfg);
        }
    }
    let names: Vec<String> =
        SUITES.iter().flat_map(|s| suite_configs(s, scale, seed).unwrap_or_default()).map(|c| c.name).collect();
    Err(config_err(format!("no fixture named `{name}` (known: {})", names.join(", "))))
}

/// A fully resolved invocation.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: RunConfig,
    pub command: CommandName,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: PathBuf,
}

/// Merge config file, environment and flags into an [`Invocation`].
pub fn resolve(cli: &Cli, env: &dyn Fn(&str) -> Option<String>) -> Result<Invocation, CliError> {
    let (common, wanted) = match &cli.command {
        Command::Simulate(a) => (&a.common, CommandName::Simulate),
        Command::Certify(a) => (&a.common, CommandName::Certify),
        Command::Experiment(a) => (&a.common, CommandName::Experiment),
        Command::Suite(a) => (&a.common, CommandName::Suite),
    };
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            let cfg = load_config(&text, &path.display().to_string())?;
            let found = cfg.command()?;
            if found != wanted {
                return Err(config_err(format!(
                    "{} describes a `{}` run, not `{}`",
                    path.display(),
                    found.as_str(),
                    wanted.as_str()
                )));
            }
            cfg
        }
        None => RunConfig::empty(),
    };

    let seed_override = match common.seed {
        Some(s) => Some(s),
        None => parse_env::<u64>(env, SEED_ENV)?,
    }
    .or(cfg.seed);

    match &cli.command {
        Command::Simulate(a) => {
            let mut sim = match cfg.simulate.take() {
                Some(s) => s,
                None => {
                    let model =
                        a.model.model.as_deref().ok_or_else(|| config_err("simulate needs --model or --config"))?;
                    let x0 = a.model.x0.clone().ok_or_else(|| config_err("simulate needs --x0 or --config"))?;
                    SimulateConfig {
                        model: parse_model(model)?,
                        x0,
                        horizon: default_horizon(),
                        dt: default_dt(),
                        paths: default_sim_paths(),
                        scheme: Scheme::default(),
                        r_explode: default_r_explode(),
                    }
                }
            };
            apply_model_args(&a.model, &mut sim.model, &mut sim.x0, &mut sim.horizon, &mut sim.dt)?;
            if let Some(p) = a.paths {
                sim.paths = p;
            }
            if let Some(s) = &a.scheme {
                sim.scheme = parse_scheme(s)?;
            }
            cfg.simulate = Some(sim);
        }
        Command::Certify(a) => {
            let mut cert = match cfg.certify.take() {
                Some(c) => c,
                None => {
                    let model = a.model.as_deref().ok_or_else(|| config_err("certify needs --model or --config"))?;
                    let assumption =
                        a.assumption.as_deref().ok_or_else(|| config_err("certify needs --assumption or --config"))?;
                    CertifyConfig {
                        model: parse_model(model)?,
                        assumption: Assumption::from_str(assumption).map_err(config_err)?,
                        gauge: None,
                        growth_sample: None,
                        n_list: default_n_list(),
                        p_list: default_p_list(),
                        pairs: None,
                        homeomorphism: None,
                    }
                }
            };
            if let Some(m) = &a.model {
                cert.model = parse_model(m)?;
            }
            if let Some(s) = &a.assumption {
                cert.assumption = Assumption::from_str(s).map_err(config_err)?;
            }
            if let Some(n) = &a.n_list {
                cert.n_list = n.clone();
            }
            cfg.certify = Some(cert);
        }
        Command::Experiment(a) => {
            let mut exp = match (cfg.experiment.take(), &a.name) {
                (Some(_), Some(_)) => return Err(config_err("give either --config or --name, not both")),
                (Some(e), None) => e,
                (None, Some(name)) => {
                    let scale = a.scale.as_deref().map(parse_scale).transpose()?.unwrap_or_default();
                    find_fixture(name, scale, seed_override.unwrap_or(0))?
                }
                (None, None) => return Err(config_err("experiment needs --config or --name")),
            };
            if a.scale.is_some() && a.name.is_none() {
                return Err(config_err("--scale applies only together with --name"));
            }
            apply_model_args(&a.model, &mut exp.model, &mut exp.x0, &mut exp.horizon, &mut exp.dt)?;
            if let Some(p) = a.paths {
                exp.paths = p;
            }
            if let Some(s) = seed_override {
                exp.seed = s;
            }
            cfg.experiment = Some(exp);
        }
        Command::Suite(a) => {
            let mut suite = match (cfg.suite.take(), &a.name) {
                (Some(s), _) => s,
                (None, Some(name)) => SuiteConfig { name: name.clone(), scale: Scale::default() },
                (None, None) => return Err(config_err("suite needs --name or --config")),
            };
            if let Some(n) = &a.name {
                suite.name = n.clone();
            }
            if let Some(s) = &a.scale {
                suite.scale = parse_scale(s)?;
            }
            cfg.suite = Some(suite);
        }
    }

    let seed = match &cfg.experiment {
        Some(e) => e.seed,
        None => seed_override.unwrap_or(0),
    };
    cfg.seed = Some(seed);

    let workers = match common.workers {
        Some(w) => Some(w),
        None => parse_env::<usize>(env, WORKERS_ENV)?,
    }
    .or(cfg.workers);
    if workers == Some(0) {
        return Err(config_err("--workers must be at least 1"));
    }
    cfg.workers = workers;

    let out = common.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    cfg.out = Some(out.clone());
    Ok(Invocation { command: cfg.command()?, config: cfg, seed, workers, out })
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Artifacts produced by a command, before they are written.
#[derive(Debug, Default)]
pub struct Outcome {
    pub verdict: Option<Verdict>,
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.verdict.map_or(0, Verdict::exit_code)
    }
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut b = serde_json::to_vec_pretty(v).map_err(|e| CliError::Runtime(e.to_string()))?;
    b.push(b'\n');
    Ok(b)
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(buf)
}

#[derive(Debug, Serialize)]
struct SimulationSummary {
    model: String,
    scheme: Scheme,
    #[serde(rename = "T")]
    horizon: f64,
    dt: f64,
    seed: u64,
    exploded: usize,
    paths: Vec<PathSummary>,
}

#[derive(Debug, Serialize)]
struct PathSummary {
    path: u64,
    file: String,
    jumps: usize,
    explosion: Option<Explosion>,
    final_state: Vec<f64>,
    sup_norm: f64,
}

fn run_simulate(sim: &SimulateConfig, seed: u64) -> Result<Outcome, CliError> {
    let model = sim.model.build()?;
    let x0 = StateVector::new(sim.x0.clone())?;
    if sim.paths == 0 {
        return Err(config_err("simulate needs at least one path"));
    }
    let scheme = SchemeConfig { scheme: sim.scheme, r_explode: sim.r_explode, dt: sim.dt, taming_exponent: 1.0 };
    scheme.validate().map_err(LabError::from)?;
    let width = (sim.paths - 1).to_string().len();
    let results: Vec<Result<(PathSummary, Vec<u8>), CliError>> = (0..sim.paths as u64)
        .into_par_iter()
        .map(|path| {
            let noise =
                sample_noise(ScenarioSeed::new(seed, path), sim.horizon, sim.dt, model.brownian_dim(), model.marks())
                    .map_err(LabError::from)?;
            let traj = simulate(&model, &x0, &noise, &scheme).map_err(LabError::from)?;
            let file =
                if sim.paths == 1 { "trajectory.csv".to_string() } else { format!("trajectory_{path:0width$}.csv") };
            let bytes = csv_bytes(|b| traj.write_csv(b))?;
            let summary = PathSummary {
                path,
                file,
                jumps: traj.jumps().len(),
                explosion: traj.explosion(),
                final_state: traj.last().to_vec(),
                sup_norm: traj.sup_norm(),
            };
            Ok((summary, bytes))
        })
        .collect();
    let mut paths = Vec::with_capacity(sim.paths);
    let mut files = Vec::with_capacity(sim.paths + 1);
    for r in results {
        let (s, b) = r?;
        files.push((s.file.clone(), b));
        paths.push(s);
    }
    let exploded = paths.iter().filter(|p| p.explosion.is_some()).count();
    let summary = SimulationSummary {
        model: model.name().to_string(),
        scheme: sim.scheme,
        horizon: sim.horizon,
        dt: sim.dt,
        seed,
        exploded,
        paths,
    };
    files.push(("simulation.json".into(), json_bytes(&summary)?));
    Ok(Outcome {
        verdict: None,
        summary: vec![format!("simulated {} path(s) of {}; {exploded} exploded", sim.paths, summary.model)],
        files,
    })
}

#[derive(Debug, Serialize)]
struct CertificateOutput {
    model: String,
    assumption: Assumption,
    verdict: Verdict,
    report: serde_json::Value,
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Runtime(e.to_string()))
}

fn run_certify(cert: &CertifyConfig, seed: u64) -> Result<Outcome, CliError> {
    let model = cert.model.build()?;
    let (verdict, report) = match cert.assumption {
        Assumption::Growth => {
            let gauge = cert.gauge.unwrap_or_else(GrowthGauge::log_e_plus);
            let sample = cert.growth_sample.clone().unwrap_or_else(|| GrowthSampleSpec::for_gauge(&gauge));
            let rep = check_growth_assumption(&model, &gauge, &sample)?;
            (rep.verdict, to_value(&rep)?)
        }
        Assumption::LogLipschitz => {
            let sampler = cert.pairs.clone().unwrap_or_else(|| PairSampler::new(200, seed));
            match check_log_lipschitz(&model, &cert.n_list, &sampler, &cert.p_list) {
                Ok(rep) => (Verdict::Pass, to_value(&rep)?),
                Err(CoefficientError::CertificateRefuted { witnesses }) => {
                    (Verdict::Fail, serde_json::json!({ "refuted": true, "witnesses": to_value(&witnesses)? }))
                }
                Err(e) => return Err(e.into()),
            }
        }
        Assumption::JumpHomeomorphism => {
            let spec = cert.homeomorphism.clone().unwrap_or(HomeoSampleSpec { seed, ..HomeoSampleSpec::default() });
            match check_jump_homeomorphism(&model, model.jump_inverse(), &spec) {
                Ok(rep) => (rep.verdict, to_value(&rep)?),
                Err(CoefficientError::InverseMismatch { x, u, error }) => {
                    (Verdict::Fail, serde_json::json!({ "inverse_mismatch": { "x": x, "u": u, "error": error } }))
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    let out = CertificateOutput { model: model.name().to_string(), assumption: cert.assumption, verdict, report };
    Ok(Outcome {
        verdict: Some(verdict),
        summary: vec![format!("{:?} for {}: {verdict}", cert.assumption, out.model)],
        files: vec![("certificate.json".into(), json_bytes(&out)?)],
    })
}

fn table_files(prefix: &str, rep: &crate::propertylab::ExperimentReport) -> Result<Vec<(String, Vec<u8>)>, CliError> {
    rep.tables.iter().map(|t| Ok((format!("{prefix}{}.csv", t.name), csv_bytes(|b| t.write_csv(b))?))).collect()
}

fn run_experiment_cmd(exp: &ExperimentConfig) -> Result<Outcome, CliError> {
    let rep = run_experiment(exp)?;
    let mut files = vec![("report.json".to_string(), json_bytes(&rep)?)];
    files.extend(table_files("", &rep)?);
    let mut summary = vec![format!("{} [{}]: {}", rep.name, rep.experiment, rep.verdict)];
    summary.extend(rep.statistics.iter().map(|s| format!("  {} = {:.6e} (se {:.2e})", s.name, s.value, s.std_error)));
    Ok(Outcome { verdict: Some(rep.verdict), files, summary })
}

fn run_suite_cmd(suite: &SuiteConfig, seed: u64) -> Result<Outcome, CliError> {
    let rep = run_suite(&suite.name, suite.scale, seed)?;
    let mut files = vec![("suite.json".to_string(), json_bytes(&rep)?)];
    for r in &rep.reports {
        files.extend(table_files(&format!("{}/", r.name), r)?);
    }
    let mut summary: Vec<String> = rep
        .entries
        .iter()
        .map(|e| {
            format!(
                "{:<28} {:<12} expected {:<12} {}",
                e.name,
                e.verdict.as_str(),
                e.expected.as_str(),
                if e.matches { "ok" } else { "MISMATCH" }
            )
        })
        .collect();
    summary.push(format!("suite {}: {}", rep.suite, rep.verdict));
    Ok(Outcome { verdict: Some(rep.verdict), files, summary })
}

/// Run the resolved command on a pool of the requested size.
pub fn execute(inv: &Invocation) -> Result<Outcome, CliError> {
    let body = || match inv.command {
        CommandName::Simulate => run_simulate(inv.config.simulate.as_ref().expect("section present"), inv.seed),
        CommandName::Certify => run_certify(inv.config.certify.as_ref().expect("section present"), inv.seed),
        CommandName::Experiment => run_experiment_cmd(inv.config.experiment.as_ref().expect("section present")),
        CommandName::Suite => run_suite_cmd(inv.config.suite.as_ref().expect("section present"), inv.seed),
    };
    match inv.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?
            .install(body),
        None => body(),
    }
}

/// Write the artifacts and the manifest into the output directory.
pub fn write_outputs(inv: &Invocation, outcome: &Outcome) -> Result<Manifest, CliError> {
    fs::create_dir_all(&inv.out).map_err(|e| io_err(&inv.out, e))?;
    let mut outputs = Vec::with_capacity(outcome.files.len());
    for (name, bytes) in &outcome.files {
        let path = inv.out.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        outputs.push(OutputFile {
            path: name.clone(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
    }
    outputs.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        tool: "jumpsde".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: inv.command.as_str().into(),
        config_hash: inv.config.hash(),
        seed: inv.seed,
        config: inv.config.clone(),
        outputs,
    };
    let path = inv.out.join("manifest.json");
    fs::write(&path, json_bytes(&manifest)?).map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

/// Entry point with an explicit environment lookup; returns the exit code.
pub fn run_with<I, T>(args: I, env: &dyn Fn(&str) -> Option<String>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let result = resolve(&cli, env).and_then(|inv| {
        let outcome = execute(&inv)?;
        write_outputs(&inv, &outcome)?;
        Ok((inv, outcome))
    });
    match result {
        Ok((inv, outcome)) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            println!("wrote {} file(s) and manifest.json to {}", outcome.files.len(), inv.out.display());
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("jumpsde: {e}");
            e.exit_code()
        }
    }
}

/// Entry point reading the declared environment variables.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &|k| std::env::var(k).ok())
}
