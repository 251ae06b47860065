use serde::{Deserialize, Serialize};

use super::{x_log_abs, x_sqrt_abs_log, Coefficients};

/// Shape of the jump coefficient of [`LogModel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JumpForm {
    /// `h(x, u) = x sqrt(|log|x||) u`.
    #[default]
    Log,
    /// `h(x, u) = x u`; invertible for marks bounded by less than one.
    Linear,
    /// `h(x, u) = u`; bounded for bounded marks.
    Additive,
    /// `h = 0`.
    None,
}

/// Scalar model with drift `a x log|x| + b`, diffusion `s x sqrt(|log|x||)`
/// and a jump term chosen by [`JumpForm`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogModel {
    pub drift_scale: f64,
    pub drift_shift: f64,
    pub diffusion_scale: f64,
    pub jump: JumpForm,
    /// `int u mu(du)`, fixes the closed-form compensator.
    pub mark_mean: f64,
}

impl LogModel {
    fn jump_factor(&self, x: f64) -> f64 {
        match self.jump {
            JumpForm::Log => x_sqrt_abs_log(x),
            JumpForm::Linear => x,
            JumpForm::Additive => 1.0,
            JumpForm::None => 0.0,
        }
    }
}

impl Coefficients for LogModel {
    fn dim(&self) -> usize {
        1
    }
    fn brownian_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.drift_scale * x_log_abs(x[0]) + self.drift_shift;
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.diffusion_scale * x_sqrt_abs_log(x[0]);
    }
    fn jump(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = self.jump_factor(x[0]) * u[0];
    }
    fn compensator(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.jump_factor(x[0]) * self.mark_mean;
    }
}

/// `dX = a X_- dN` written in compensated form: drift `lambda a x`, jump
/// `a x`, compensator `lambda a x`. The net continuous drift is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PureJumpLinear {
    pub a: f64,
    pub lambda: f64,
}

impl Coefficients for PureJumpLinear {
    fn dim(&self) -> usize {
        1
    }
    fn brownian_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.lambda * self.a * x[0];
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn jump(&self, x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = self.a * x[0];
    }
    fn compensator(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.lambda * self.a * x[0];
    }
}

/// `f = g = h = 0` in any dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroModel {
    pub dim: usize,
}

impl Coefficients for ZeroModel {
    fn dim(&self) -> usize {
        self.dim
    }
    fn brownian_dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn jump(&self, _x: &[f64], _u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn compensator(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Deterministic drift `f(x) = |x|^p`; `p = 2` is the blow-up fixture.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDrift {
    pub exponent: f64,
}

impl Coefficients for PowerDrift {
    fn dim(&self) -> usize {
        1
    }
    fn brownian_dim(&self) -> usize {
        1
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        out[0] = if self.exponent == 2.0 { x[0] * x[0] } else { x[0].abs().powf(self.exponent) };
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn jump(&self, _x: &[f64], _u: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn compensator(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
}
