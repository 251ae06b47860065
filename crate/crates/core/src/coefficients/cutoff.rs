use std::sync::Arc;

use super::marks::norm;
use super::{CoefficientModel, Coefficients};

fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// `phi_R(x)`: 1 for `|x| <= R+1`, 0 for `|x| >= R+3`, and a quintic
/// smoothstep in `|x|` between. Its slope never exceeds 15/16.
pub fn cutoff_weight(x: &[f64], r: f64) -> f64 {
    let s = norm(x);
    if s <= r + 1.0 {
        1.0
    } else if s >= r + 3.0 {
        0.0
    } else {
        1.0 - smoothstep5((s - r - 1.0) / 2.0)
    }
}

/// Derivative of `phi_R` with respect to `|x|`.
pub fn cutoff_derivative(radius: f64, r: f64) -> f64 {
    let t = (radius - r - 1.0) / 2.0;
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    -30.0 * t * t * (1.0 - t) * (1.0 - t) / 2.0
}

#[derive(Debug)]
struct Cutoff {
    inner: Arc<dyn Coefficients>,
    r: f64,
}

impl Coefficients for Cutoff {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn brownian_dim(&self) -> usize {
        self.inner.brownian_dim()
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        scaled(x, self.r, out, |o| self.inner.drift(x, o));
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        scaled(x, self.r, out, |o| self.inner.diffusion(x, o));
    }
    fn jump(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        scaled(x, self.r, out, |o| self.inner.jump(x, u, o));
    }
    fn compensator(&self, x: &[f64], out: &mut [f64]) {
        scaled(x, self.r, out, |o| self.inner.compensator(x, o));
    }
}

fn scaled(x: &[f64], r: f64, out: &mut [f64], eval: impl FnOnce(&mut [f64])) {
    let w = cutoff_weight(x, r);
    if w == 0.0 {
        out.fill(0.0);
        return;
    }
    eval(out);
    if w != 1.0 {
        for v in out.iter_mut() {
            *v *= w;
        }
    }
}

/// `(phi_R f, phi_R g, phi_R h)` with compensator `phi_R c`.
///
/// The result is flagged bounded. A declared jump inverse does not survive
/// the cutoff and is dropped.
pub fn apply_cutoff(model: &CoefficientModel, r: f64) -> CoefficientModel {
    assert!(r > 0.0 && r.is_finite(), "cutoff radius must be positive");
    let coeffs = Cutoff { inner: model.coefficients().clone(), r };
    CoefficientModel::new(format!("{}_cutoff_{r}", model.name()), Arc::new(coeffs), model.marks().clone())
        .with_bounded(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateaus_and_slope_bound() {
        let r = 2.0;
        assert_eq!(cutoff_weight(&[3.0], r), 1.0);
        assert_eq!(cutoff_weight(&[-5.0], r), 0.0);
        let mid = cutoff_weight(&[4.0], r);
        assert!((mid - 0.5).abs() < 1e-15);
        let mut max_slope: f64 = 0.0;
        for i in 0..=2000 {
            let s = r + 1.0 + 2.0 * i as f64 / 2000.0;
            max_slope = max_slope.max(cutoff_derivative(s, r).abs());
        }
        assert!((max_slope - 15.0 / 16.0).abs() < 1e-6, "{max_slope}");
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let r = 1.0;
        for &s in &[2.3, 2.9, 3.5, 4.7] {
            let h = 1e-6;
            let fd = (cutoff_weight(&[s + h], r) - cutoff_weight(&[s - h], r)) / (2.0 * h);
            assert!((fd - cutoff_derivative(s, r)).abs() < 1e-8);
        }
    }
}
