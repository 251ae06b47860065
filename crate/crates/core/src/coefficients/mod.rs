//! Coefficient triples `(f, g, h)` with their compensator, plus numerical
//! certification of the growth, log-Lipschitz, comparison and jump-inverse
//! assumptions.
//!
//! The state space is `R^m`, the Brownian motion is `n`-dimensional and the
//! mark space carries a finite measure `mu` (see [`MarkSpace`]). The
//! compensated jump integral is simulated as a jump sum minus the drift
//! `c(x) = int h(x,u) mu(du)`, so every model provides `c` either in closed
//! form or by fixed-node quadrature over the marks.

mod builtin;
mod certify;
mod cutoff;
pub mod expr;
mod gauge;
mod marks;
mod spec;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{JumpForm, LogModel, PowerDrift, PureJumpLinear, ZeroModel};
pub use certify::{
    check_comparison_assumption, check_growth_assumption, check_jump_homeomorphism, check_log_lipschitz,
    compensator_consistency, fit_log_lipschitz, ComparisonCertificate, ComparisonReport, CompensatorReport,
    GrowthReport, GrowthSampleSpec, GrowthWitness, HomeoReport, HomeoSampleSpec, LogLipschitzCertificate,
    LogLipschitzReport, ModulusShape, PairClass, PairDomain, PairSampler, PairWitness, SigmaFit, SIGMA_GRID,
};
pub use cutoff::{apply_cutoff, cutoff_derivative, cutoff_weight};
pub use expr::{Expr, ExprModel};
pub use gauge::{GaugeKind, GaugeReport, GrowthGauge};
pub use marks::{MarkLaw, MarkSpace};
pub use spec::{BuiltinParams, ExprSpec, ModelSpec, BUILTINS};

use crate::quadrature::QuadratureError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoefficientError {
    #[error("coefficient {component} is not finite at x = {x:?}")]
    Evaluation { x: Vec<f64>, component: &'static str },
    #[error("growth gauge undefined at s = {s} (gauge threshold K = {threshold})")]
    GaugeDomain { s: f64, threshold: f64 },
    #[error("no (C, sigma) fits the log-Lipschitz inequalities; {} witness pair(s)", witnesses.len())]
    CertificateRefuted { witnesses: Vec<PairWitness> },
    #[error("jump inverse mismatch at x = {x:?}, u = {u:?}: round-trip error {error:e}")]
    InverseMismatch { x: Vec<f64>, u: Vec<f64>, error: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("model configuration: {0}")]
    Config(String),
    #[error("expression: {0}")]
    Parse(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// A point of `R^m` with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(components: Vec<f64>) -> Result<Self, CoefficientError> {
        if components.is_empty() {
            return Err(CoefficientError::Config("state vector must be non-empty".into()));
        }
        if components.iter().any(|v| !v.is_finite()) {
            return Err(CoefficientError::Evaluation { x: components, component: "state" });
        }
        Ok(StateVector(components))
    }

    pub fn scalar(x: f64) -> Result<Self, CoefficientError> {
        StateVector::new(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        marks::norm(&self.0)
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = CoefficientError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        StateVector::new(v)
    }
}

impl From<StateVector> for Vec<f64> {
    fn from(s: StateVector) -> Self {
        s.0
    }
}

/// Raw coefficient evaluation into caller-provided buffers.
///
/// `diffusion` writes an `m x n` matrix in row-major order. Implementations
/// must be pure: the same input always produces bitwise the same output.
pub trait Coefficients: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn brownian_dim(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, x: &[f64], out: &mut [f64]);
    fn jump(&self, x: &[f64], u: &[f64], out: &mut [f64]);
    /// `c(x) = int h(x, u) mu(du)`.
    fn compensator(&self, x: &[f64], out: &mut [f64]);
}

/// Closed-form solutions some fixtures carry, for cross-checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExactSolution {
    /// `X_t = x0` for all t.
    Constant,
    /// `dX = a X_- dN`: `X_t = x0 (1 + a)^{N_t}`.
    LinearJump { a: f64 },
    /// `dX = X log X dt` for `x0 > 0`: `X_t = x0^{exp(t)}`.
    PureDriftLog,
    /// `dX = X^2 dt`: `X_t = 1 / (1/x0 - t)`, blowing up at `t = 1/x0`.
    Quadratic,
}

type InverseFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// Declared inverse `Lambda_u` of `Gamma_u(x) = x + h(x, u)` with its
/// Lipschitz/linear-growth constant.
#[derive(Clone)]
pub struct JumpHomeoCertificate {
    inverse: Arc<InverseFn>,
    pub k_inv: f64,
}

impl JumpHomeoCertificate {
    pub fn new<F>(inverse: F, k_inv: f64) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        JumpHomeoCertificate { inverse: Arc::new(inverse), k_inv }
    }

    /// The identity inverse, valid when `h = 0`.
    pub fn identity() -> Self {
        JumpHomeoCertificate::new(|y, _u, out| out.copy_from_slice(y), 1.0)
    }

    pub fn invert(&self, y: &[f64], u: &[f64], out: &mut [f64]) {
        (self.inverse)(y, u, out)
    }
}

impl fmt::Debug for JumpHomeoCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpHomeoCertificate").field("k_inv", &self.k_inv).finish_non_exhaustive()
    }
}

/// A coefficient triple bound to its mark measure and metadata.
#[derive(Debug, Clone)]
pub struct CoefficientModel {
    name: String,
    coefficients: Arc<dyn Coefficients>,
    marks: MarkSpace,
    exact: Option<ExactSolution>,
    jump_inverse: Option<JumpHomeoCertificate>,
    bounded: bool,
}

impl CoefficientModel {
    pub fn new(name: impl Into<String>, coefficients: Arc<dyn Coefficients>, marks: MarkSpace) -> Self {
        CoefficientModel { name: name.into(), coefficients, marks, exact: None, jump_inverse: None, bounded: false }
    }

    pub fn with_exact_solution(mut self, exact: ExactSolution) -> Self {
        self.exact = Some(exact);
        self
    }

    pub fn with_jump_inverse(mut self, cert: JumpHomeoCertificate) -> Self {
        self.jump_inverse = Some(cert);
        self
    }

    /// Declare `f` and `g` uniformly bounded.
    pub fn with_bounded(mut self, bounded: bool) -> Self {
        self.bounded = bounded;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coefficients.dim()
    }

    pub fn brownian_dim(&self) -> usize {
        self.coefficients.brownian_dim()
    }

    pub fn marks(&self) -> &MarkSpace {
        &self.marks
    }

    pub fn coefficients(&self) -> &Arc<dyn Coefficients> {
        &self.coefficients
    }

    pub fn exact_solution(&self) -> Option<ExactSolution> {
        self.exact
    }

    pub fn jump_inverse(&self) -> Option<&JumpHomeoCertificate> {
        self.jump_inverse.as_ref()
    }

    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    pub(crate) fn rename(mut self, name: String) -> Self {
        self.name = name;
        self
    }
}

/// Values of every coefficient at one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientValues {
    pub drift: Vec<f64>,
    /// Row-major `m x n`.
    pub diffusion: Vec<f64>,
    pub jump: Option<Vec<f64>>,
    pub compensator: Vec<f64>,
}

/// Evaluate `f(x)`, `g(x)`, `h(x, u)` (when a mark is supplied) and `c(x)`.
pub fn eval_coefficients(
    model: &CoefficientModel,
    x: &StateVector,
    u: Option<&[f64]>,
) -> Result<CoefficientValues, CoefficientError> {
    let m = model.dim();
    if x.dim() != m {
        return Err(CoefficientError::Dimension { expected: m, got: x.dim() });
    }
    let c = model.coefficients();
    let xs = x.as_slice();
    let mut drift = vec![0.0; m];
    let mut diffusion = vec![0.0; m * model.brownian_dim()];
    let mut compensator = vec![0.0; m];
    c.drift(xs, &mut drift);
    c.diffusion(xs, &mut diffusion);
    c.compensator(xs, &mut compensator);
    let jump = match u {
        Some(u) => {
            if u.len() != model.marks().dim() {
                return Err(CoefficientError::Dimension { expected: model.marks().dim(), got: u.len() });
            }
            let mut h = vec![0.0; m];
            c.jump(xs, u, &mut h);
            Some(h)
        }
        None => None,
    };
    let check = |v: &[f64], component| {
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(CoefficientError::Evaluation { x: xs.to_vec(), component })
        }
    };
    check(&drift, "drift")?;
    check(&diffusion, "diffusion")?;
    check(&compensator, "compensator")?;
    if let Some(h) = &jump {
        check(h, "jump")?;
    }
    Ok(CoefficientValues { drift, diffusion, jump, compensator })
}

/// `x log|x|`, continuously extended by 0 at the origin.
pub fn x_log_abs(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.abs().ln()
    }
}

/// `x sqrt(|log|x||)`, continuously extended by 0 at the origin.
pub fn x_sqrt_abs_log(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.abs().ln().abs().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_model() -> CoefficientModel {
        ModelSpec::builtin("log_model").build().unwrap()
    }

    #[test]
    fn log_model_at_e() {
        let e = std::f64::consts::E;
        let v = eval_coefficients(&log_model(), &StateVector::scalar(e).unwrap(), Some(&[0.3])).unwrap();
        assert!((v.drift[0] - e).abs() < 1e-15);
        assert!((v.diffusion[0] - e).abs() < 1e-15);
        assert!((v.jump.unwrap()[0] - e * 0.3).abs() < 1e-15);
    }

    #[test]
    fn log_model_at_origin_uses_limit_convention() {
        let v = eval_coefficients(&log_model(), &StateVector::scalar(0.0).unwrap(), Some(&[0.4])).unwrap();
        assert_eq!(v.drift, vec![0.0]);
        assert_eq!(v.diffusion, vec![0.0]);
        assert_eq!(v.jump, Some(vec![0.0]));
    }

    #[test]
    fn flip_jump_sends_state_to_origin() {
        let model = ModelSpec::builtin("pure_jump_flip").build().unwrap();
        let v = eval_coefficients(&model, &StateVector::scalar(3.0).unwrap(), Some(&[0.0])).unwrap();
        assert_eq!(v.jump, Some(vec![-3.0]));
    }

    #[test]
    fn non_finite_output_is_reported_with_state() {
        let spec = ModelSpec::expr("1/x", "0", "0");
        let model = spec.build().unwrap();
        let err = eval_coefficients(&model, &StateVector::scalar(0.0).unwrap(), None).unwrap_err();
        match err {
            CoefficientError::Evaluation { x, component } => {
                assert_eq!(x, vec![0.0]);
                assert_eq!(component, "drift");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn state_vector_rejects_non_finite() {
        assert!(StateVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(StateVector::new(vec![]).is_err());
    }

    #[test]
    fn evaluation_is_bitwise_repeatable() {
        let model = log_model();
        for &x in &[-3.7, -1.0, -1e-9, 0.2, 1.0 + 1e-12, 42.0] {
            let s = StateVector::scalar(x).unwrap();
            let a = eval_coefficients(&model, &s, Some(&[0.1])).unwrap();
            let b = eval_coefficients(&model, &s, Some(&[0.1])).unwrap();
            assert_eq!(a, b);
        }
    }
}
