use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::builtin::{JumpForm, LogModel, PowerDrift, PureJumpLinear, ZeroModel};
use super::cutoff::apply_cutoff;
use super::expr::{Expr, ExprModel};
use super::{CoefficientError, CoefficientModel, ExactSolution, JumpHomeoCertificate, MarkLaw, MarkSpace};

/// Builtin model names accepted by [`ModelSpec`].
pub const BUILTINS: &[&str] =
    &["log_model", "pure_jump_flip", "pure_jump_double_flip", "pure_jump_linear", "zero", "quadratic_drift"];

/// Optional parameters of the builtin models; unset values take defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump: Option<JumpForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marks: Option<MarkLaw>,
    /// Jump factor of `pure_jump_linear`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
}

/// Scalar model given by expressions in `x` (and `u` for the jump).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExprSpec {
    pub drift: String,
    #[serde(default = "zero_expr")]
    pub diffusion: String,
    #[serde(default = "zero_expr")]
    pub jump: String,
    /// Closed-form `c(x)`; quadrature over the marks when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compensator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marks: Option<MarkLaw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Inverse `Lambda_u(y)` written with `x` standing for `y`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_inverse: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_inv: Option<f64>,
    #[serde(default)]
    pub bounded: bool,
}

fn zero_expr() -> String {
    "0".into()
}

/// Declarative model description, as found in config files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub params: BuiltinParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<ExprSpec>,
    /// Radius `R` of the smooth cutoff applied after construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
}

fn is_default(p: &BuiltinParams) -> bool {
    *p == BuiltinParams::default()
}

fn default_log_marks() -> MarkLaw {
    MarkLaw::UniformBall { radius: 0.5, dim: 1 }
}

impl ModelSpec {
    pub fn builtin(name: &str) -> Self {
        ModelSpec { builtin: Some(name.to_string()), ..Default::default() }
    }

    pub fn expr(drift: &str, diffusion: &str, jump: &str) -> Self {
        ModelSpec {
            expr: Some(ExprSpec {
                drift: drift.into(),
                diffusion: diffusion.into(),
                jump: jump.into(),
                compensator: None,
                marks: None,
                lambda: None,
                jump_inverse: None,
                k_inv: None,
                bounded: false,
            }),
            ..Default::default()
        }
    }

    pub fn with_params(mut self, params: BuiltinParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_cutoff(mut self, r: f64) -> Self {
        self.cutoff = Some(r);
        self
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = Some(name.to_string());
        self
    }

    pub fn build(&self) -> Result<CoefficientModel, CoefficientError> {
        let model = match (&self.builtin, &self.expr) {
            (Some(b), None) => build_builtin(b, &self.params)?,
            (None, Some(e)) => {
                if self.params != BuiltinParams::default() {
                    return Err(CoefficientError::Config("`params` applies to builtin models only".into()));
                }
                build_expr(e)?
            }
            _ => return Err(CoefficientError::Config("model needs exactly one of `builtin` or `expr`".into())),
        };
        let model = match self.cutoff {
            Some(r) if r.is_finite() && r > 0.0 => apply_cutoff(&model, r),
            Some(r) => return Err(CoefficientError::Config(format!("cutoff radius must be > 0, got {r}"))),
            None => model,
        };
        Ok(match &self.name {
            Some(n) => model.rename(n.clone()),
            None => model,
        })
    }
}

fn finite(name: &str, v: f64) -> Result<f64, CoefficientError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CoefficientError::Config(format!("{name} must be finite, got {v}")))
    }
}

fn build_builtin(name: &str, p: &BuiltinParams) -> Result<CoefficientModel, CoefficientError> {
    let unused = |fields: &[(&str, bool)]| -> Result<(), CoefficientError> {
        for (f, set) in fields {
            if *set {
                return Err(CoefficientError::Config(format!("parameter `{f}` does not apply to {name}")));
            }
        }
        Ok(())
    };
    match name {
        "log_model" => {
            unused(&[("a", p.a.is_some()), ("dimension", p.dimension.is_some()), ("exponent", p.exponent.is_some())])?;
            let jump = p.jump.unwrap_or_default();
            let lambda = p.lambda.unwrap_or(1.0);
            let law = p.marks.clone().unwrap_or_else(default_log_marks);
            if law.dim() != 1 {
                return Err(CoefficientError::Dimension { expected: 1, got: law.dim() });
            }
            let marks = MarkSpace::new(law, lambda)?;
            let lm = LogModel {
                drift_scale: finite("drift_scale", p.drift_scale.unwrap_or(1.0))?,
                drift_shift: finite("drift_shift", p.drift_shift.unwrap_or(0.0))?,
                diffusion_scale: finite("diffusion_scale", p.diffusion_scale.unwrap_or(1.0))?,
                jump,
                mark_mean: marks.first_moment()[0],
            };
            let no_jumps = jump == JumpForm::None || lambda == 0.0;
            let pure_drift_log =
                no_jumps && lm.diffusion_scale == 0.0 && lm.drift_shift == 0.0 && lm.drift_scale == 1.0;
            let bound = marks.bound();
            let mut model = CoefficientModel::new(name, Arc::new(lm), marks);
            if pure_drift_log {
                model = model.with_exact_solution(ExactSolution::PureDriftLog);
            }
            match (jump, bound) {
                (JumpForm::None, _) => model = model.with_jump_inverse(JumpHomeoCertificate::identity()),
                (JumpForm::Linear, Some(r)) if r < 1.0 => {
                    model = model.with_jump_inverse(JumpHomeoCertificate::new(
                        |y, u, out| out[0] = y[0] / (1.0 + u[0]),
                        1.0 / (1.0 - r),
                    ))
                }
                (JumpForm::Additive, Some(r)) => {
                    model =
                        model.with_jump_inverse(JumpHomeoCertificate::new(|y, u, out| out[0] = y[0] - u[0], r.max(1.0)))
                }
                _ => {}
            }
            Ok(model)
        }
        "pure_jump_flip" | "pure_jump_double_flip" | "pure_jump_linear" => {
            unused(&[
                ("drift_scale", p.drift_scale.is_some()),
                ("drift_shift", p.drift_shift.is_some()),
                ("diffusion_scale", p.diffusion_scale.is_some()),
                ("jump", p.jump.is_some()),
                ("marks", p.marks.is_some()),
                ("dimension", p.dimension.is_some()),
                ("exponent", p.exponent.is_some()),
            ])?;
            let a = match name {
                "pure_jump_flip" => {
                    unused(&[("a", p.a.is_some())])?;
                    -1.0
                }
                "pure_jump_double_flip" => {
                    unused(&[("a", p.a.is_some())])?;
                    -2.0
                }
                _ => finite("a", p.a.ok_or_else(|| CoefficientError::Config("pure_jump_linear needs `a`".into()))?)?,
            };
            let lambda = p.lambda.unwrap_or(1.0);
            let marks = MarkSpace::new(MarkLaw::PointMass { at: vec![0.0] }, lambda)?;
            let mut model = CoefficientModel::new(name, Arc::new(PureJumpLinear { a, lambda }), marks)
                .with_exact_solution(ExactSolution::LinearJump { a })
                .with_bounded(true);
            if a != -1.0 && (1.0 + a).is_finite() {
                let k = (1.0 / (1.0 + a)).abs().max(1.0);
                model =
                    model.with_jump_inverse(JumpHomeoCertificate::new(move |y, _u, out| out[0] = y[0] / (1.0 + a), k));
            }
            Ok(model)
        }
        "zero" => {
            unused(&[
                ("drift_scale", p.drift_scale.is_some()),
                ("drift_shift", p.drift_shift.is_some()),
                ("diffusion_scale", p.diffusion_scale.is_some()),
                ("jump", p.jump.is_some()),
                ("a", p.a.is_some()),
                ("exponent", p.exponent.is_some()),
            ])?;
            let dim = p.dimension.unwrap_or(1);
            if dim == 0 {
                return Err(CoefficientError::Config("dimension must be positive".into()));
            }
            let lambda = p.lambda.unwrap_or(0.0);
            let law = p.marks.clone().unwrap_or(MarkLaw::PointMass { at: vec![0.0] });
            Ok(CoefficientModel::new(name, Arc::new(ZeroModel { dim }), MarkSpace::new(law, lambda)?)
                .with_exact_solution(ExactSolution::Constant)
                .with_jump_inverse(JumpHomeoCertificate::identity())
                .with_bounded(true))
        }
        "quadratic_drift" => {
            unused(&[
                ("drift_scale", p.drift_scale.is_some()),
                ("drift_shift", p.drift_shift.is_some()),
                ("diffusion_scale", p.diffusion_scale.is_some()),
                ("jump", p.jump.is_some()),
                ("a", p.a.is_some()),
                ("dimension", p.dimension.is_some()),
                ("lambda", p.lambda.is_some()),
                ("marks", p.marks.is_some()),
            ])?;
            let exponent = p.exponent.unwrap_or(2.0);
            if !(exponent.is_finite() && exponent > 0.0) {
                return Err(CoefficientError::Config("exponent must be positive".into()));
            }
            let mut model = CoefficientModel::new(name, Arc::new(PowerDrift { exponent }), MarkSpace::none())
                .with_jump_inverse(JumpHomeoCertificate::identity());
            if exponent == 2.0 {
                model = model.with_exact_solution(ExactSolution::Quadratic);
            }
            Ok(model)
        }
        other => Err(CoefficientError::Config(format!(
            "unknown builtin `{other}` (expected one of {})",
            BUILTINS.join(", ")
        ))),
    }
}

fn build_expr(e: &ExprSpec) -> Result<CoefficientModel, CoefficientError> {
    let law = e.marks.clone().unwrap_or(MarkLaw::PointMass { at: vec![0.0] });
    let lambda = e.lambda.unwrap_or(if e.marks.is_some() { 1.0 } else { 0.0 });
    let marks = MarkSpace::new(law, lambda)?;
    let drift = Expr::parse(&e.drift)?;
    let diffusion = Expr::parse(&e.diffusion)?;
    let jump = Expr::parse(&e.jump)?;
    let compensator = e.compensator.as_deref().map(Expr::parse).transpose()?;
    let coeffs = ExprModel::new(drift, diffusion, jump, compensator, &marks)?;
    let name = format!("expr(f={}, g={}, h={})", e.drift, e.diffusion, e.jump);
    let mut model = CoefficientModel::new(name, Arc::new(coeffs), marks).with_bounded(e.bounded);
    match (&e.jump_inverse, e.k_inv) {
        (Some(src), Some(k)) => {
            let inv = Expr::parse(src)?;
            model =
                model.with_jump_inverse(JumpHomeoCertificate::new(move |y, u, out| out[0] = inv.eval(y[0], u[0]), k));
        }
        (None, None) => {}
        _ => return Err(CoefficientError::Config("`jump_inverse` and `k_inv` go together".into())),
    }
    Ok(model)
}
