//! C ABI over `jumpsde`.
//!
//! Objects cross the boundary as opaque handles released by their `_free`
//! function. Every fallible call returns a [`JsdStatus`]; on failure the
//! message is available from [`jsd_last_error`] on the same thread until the
//! next failing call. Strings handed out by the library are released with
//! [`jsd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use jumpsde::coefficients::{eval_coefficients, CoefficientError, CoefficientModel, ModelSpec, StateVector};
use jumpsde::integrator::{simulate, IntegratorError, Scheme, SchemeConfig, Trajectory};
use jumpsde::noise::{sample_noise, ScenarioSeed};
use jumpsde::propertylab::{run_experiment, run_suite, ExperimentConfig, LabError, Scale};
use jumpsde::report::Verdict;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JsdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Invalid model, experiment config or argument.
    Config = 3,
    /// The computation itself failed.
    Runtime = 4,
    /// A caller buffer is smaller than the required length.
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JsdScheme {
    Euler = 0,
    TamedEuler = 1,
}

/// Same numbering as the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JsdVerdict {
    Pass = 0,
    Fail = 2,
    Inconclusive = 3,
}

impl From<Verdict> for JsdVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Pass => JsdVerdict::Pass,
            Verdict::Fail => JsdVerdict::Fail,
            Verdict::Inconclusive => JsdVerdict::Inconclusive,
        }
    }
}

/// A built coefficient model.
pub struct JsdModel {
    inner: CoefficientModel,
}

/// A simulated path.
pub struct JsdTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(JsdStatus, String);

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        let status = if e.is_config() { JsdStatus::Config } else { JsdStatus::Runtime };
        Failure(status, e.to_string())
    }
}

impl From<CoefficientError> for Failure {
    fn from(e: CoefficientError) -> Self {
        LabError::from(e).into()
    }
}

impl From<IntegratorError> for Failure {
    fn from(e: IntegratorError) -> Self {
        LabError::from(e).into()
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> JsdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => JsdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            JsdStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(JsdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(JsdStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_slice(
    out: *mut f64,
    cap: usize,
    src: impl ExactSizeIterator<Item = f64>,
    what: &str,
) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    if cap < src.len() {
        return Err(Failure(JsdStatus::BufferTooSmall, format!("{what} needs {} entries, got {cap}", src.len())));
    }
    for (i, v) in src.enumerate() {
        *out.add(i) = v;
    }
    Ok(())
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|_| Failure(JsdStatus::Runtime, "output contains NUL".into()))
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure(JsdStatus::Config, format!("{what}: {e}")))
}

/// Message of the last failed call on this thread; empty if none. Owned by
/// the library.
#[no_mangle]
pub extern "C" fn jsd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn jsd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn jsd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Build a model from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jsd_model_from_json(json: *const c_char, out: *mut *mut JsdModel) -> JsdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec: ModelSpec = parse_json(read_str(json, "json")?, "model spec")?;
        let inner = spec.build()?;
        *out = Box::into_raw(Box::new(JsdModel { inner }));
        Ok(())
    })
}

/// Build a builtin model with default parameters.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jsd_model_builtin(name: *const c_char, out: *mut *mut JsdModel) -> JsdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = ModelSpec::builtin(read_str(name, "name")?).build()?;
        *out = Box::into_raw(Box::new(JsdModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn jsd_model_free(model: *mut JsdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jsd_model_dim(model: *const JsdModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Brownian dimension, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jsd_model_brownian_dim(model: *const JsdModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.brownian_dim())
}

/// Evaluate drift (`dim` entries), diffusion (`dim * brownian_dim`, row
/// major) and compensator (`dim`) at `x`. Any output pointer may be null.
///
/// # Safety
/// `x` must hold `dim` doubles and each non-null output the stated length.
#[no_mangle]
pub unsafe extern "C" fn jsd_model_eval(
    model: *const JsdModel,
    x: *const f64,
    dim: usize,
    drift: *mut f64,
    diffusion: *mut f64,
    compensator: *mut f64,
) -> JsdStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let x = StateVector::new(read_slice(x, dim, "x")?.to_vec())?;
        let v = eval_coefficients(&m.inner, &x, None)?;
        for (out, src) in [(drift, &v.drift), (diffusion, &v.diffusion), (compensator, &v.compensator)] {
            if !out.is_null() {
                write_slice(out, src.len(), src.iter().copied(), "output")?;
            }
        }
        Ok(())
    })
}

/// Simulate one path on `[0, horizon]`; the noise is fixed by `(seed, path)`.
///
/// # Safety
/// `x0` must hold `dim` doubles and `out` be a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn jsd_simulate(
    model: *const JsdModel,
    x0: *const f64,
    dim: usize,
    horizon: f64,
    dt: f64,
    scheme: JsdScheme,
    r_explode: f64,
    seed: u64,
    path: u64,
    out: *mut *mut JsdTrajectory,
) -> JsdStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let x0 = StateVector::new(read_slice(x0, dim, "x0")?.to_vec())?;
        let scheme = match scheme {
            JsdScheme::Euler => Scheme::Euler,
            JsdScheme::TamedEuler => Scheme::TamedEuler,
        };
        let cfg = SchemeConfig { scheme, r_explode, dt, taming_exponent: 1.0 };
        cfg.validate()?;
        let noise = sample_noise(ScenarioSeed::new(seed, path), horizon, dt, m.inner.brownian_dim(), m.inner.marks())
            .map_err(LabError::from)?;
        let inner = simulate(&m.inner, &x0, &noise, &cfg)?;
        *out = Box::into_raw(Box::new(JsdTrajectory { inner }));
        Ok(())
    })
}

/// # Safety
/// `traj` must come from this library and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn jsd_trajectory_free(traj: *mut JsdTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of reported times, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jsd_trajectory_len(traj: *const JsdTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn jsd_trajectory_dim(traj: *const JsdTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.dim())
}

/// Copy the `len` reported times into `out`.
///
/// # Safety
/// `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn jsd_trajectory_times(traj: *const JsdTrajectory, out: *mut f64, cap: usize) -> JsdStatus {
    guard(|| {
        let t = traj.as_ref().ok_or_else(|| null("trajectory"))?;
        write_slice(out, cap, t.inner.times().iter().copied(), "times")
    })
}

/// Copy the states, `len * dim` doubles in time order, into `out`.
///
/// # Safety
/// `out` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn jsd_trajectory_states(traj: *const JsdTrajectory, out: *mut f64, cap: usize) -> JsdStatus {
    guard(|| {
        let t = traj.as_ref().ok_or_else(|| null("trajectory"))?;
        let values: Vec<f64> = t.inner.states().flatten().copied().collect();
        write_slice(out, cap, values.into_iter(), "states")
    })
}

/// 1 if the path exploded (time stored in `time` when non-null), else 0.
///
/// # Safety
/// `traj` must be null or a live handle; `time` null or writable.
#[no_mangle]
pub unsafe extern "C" fn jsd_trajectory_explosion(traj: *const JsdTrajectory, time: *mut f64) -> i32 {
    match traj.as_ref().and_then(|t| t.inner.explosion()) {
        Some(e) => {
            if !time.is_null() {
                *time = e.time;
            }
            1
        }
        None => 0,
    }
}

/// Run an experiment from its JSON config; the report JSON goes to `report`
/// (free with [`jsd_string_free`]) and its verdict to `verdict` if non-null.
///
/// # Safety
/// `config` must be a NUL-terminated string and `report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jsd_run_experiment(
    config: *const c_char,
    report: *mut *mut c_char,
    verdict: *mut JsdVerdict,
) -> JsdStatus {
    guard(|| {
        if report.is_null() {
            return Err(null("report"));
        }
        let cfg: ExperimentConfig = parse_json(read_str(config, "config")?, "experiment config")?;
        let rep = run_experiment(&cfg)?;
        let json = serde_json::to_string(&rep).map_err(|e| Failure(JsdStatus::Runtime, e.to_string()))?;
        *report = to_c_string(json)?;
        if !verdict.is_null() {
            *verdict = rep.verdict.into();
        }
        Ok(())
    })
}

/// Run a pinned suite (`smoke` nonzero for reduced path counts); the suite
/// report JSON goes to `report` and the suite verdict to `verdict`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `report` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn jsd_run_suite(
    name: *const c_char,
    smoke: i32,
    seed: u64,
    report: *mut *mut c_char,
    verdict: *mut JsdVerdict,
) -> JsdStatus {
    guard(|| {
        if report.is_null() {
            return Err(null("report"));
        }
        let scale = if smoke != 0 { Scale::Smoke } else { Scale::Full };
        let rep = run_suite(read_str(name, "name")?, scale, seed)?;
        let json = serde_json::to_string(&rep).map_err(|e| Failure(JsdStatus::Runtime, e.to_string()))?;
        *report = to_c_string(json)?;
        if !verdict.is_null() {
            *verdict = rep.verdict.into();
        }
        Ok(())
    })
}
