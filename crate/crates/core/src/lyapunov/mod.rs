//! Lyapunov functions built from a growth gauge, and Yamada–Watanabe
//! smoothers built from a comparison modulus.
//!
//! `Psi(xi) = int_0^xi ds / (s rho(s) + 1)` and `Phi = exp(+-Psi)`. Gauges
//! defined on `[K, inf)` enter through their constant extension
//! `rho(max(s, K))`, which keeps `Psi` finite near the origin.

mod yamada;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::GrowthGauge;
use crate::quadrature::{adaptive_simpson, QuadratureError};

pub use yamada::{build_yamada_sequence, Modulus, Smoother, YamadaSequence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LyapunovError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("cannot construct level {n}: {reason}")]
    Construction { n: usize, reason: String },
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

/// Breakpoints `0, 1, 2, 4, ..., 2^BREAKS` with cached `Psi` values.
const BREAKS: usize = 64;

/// `Psi` with `Phi = exp(+Psi)` or `exp(-Psi)`.
#[derive(Debug, Clone)]
pub struct LyapunovPair {
    gauge: GrowthGauge,
    sign: Sign,
    tol: f64,
    /// `(xi_k, Psi(xi_k))`.
    table: Vec<(f64, f64)>,
}

/// Construct the pair with absolute quadrature error at most `tol` on `Psi`.
pub fn build_lyapunov(gauge: GrowthGauge, sign: Sign, tol: f64) -> Result<LyapunovPair, LyapunovError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(LyapunovError::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let seg_tol = tol / (4.0 * (BREAKS as f64 + 2.0));
    let mut table = Vec::with_capacity(BREAKS + 2);
    table.push((0.0, 0.0));
    let mut acc = 0.0;
    let mut lo = 0.0;
    for k in 0..=BREAKS {
        let hi = 2f64.powi(k as i32);
        acc += adaptive_simpson(|s| integrand(&gauge, s), lo, hi, seg_tol)?;
        table.push((hi, acc));
        lo = hi;
    }
    Ok(LyapunovPair { gauge, sign, tol, table })
}

fn integrand(gauge: &GrowthGauge, s: f64) -> f64 {
    1.0 / (s * gauge.rho_extended(s) + 1.0)
}

impl LyapunovPair {
    pub fn gauge(&self) -> &GrowthGauge {
        &self.gauge
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn psi(&self, xi: f64) -> Result<f64, LyapunovError> {
        if !(xi >= 0.0) {
            return Err(LyapunovError::Argument(format!("Psi needs xi >= 0, got {xi}")));
        }
        if xi == 0.0 {
            return Ok(0.0);
        }
        if xi.is_infinite() {
            return Ok(f64::INFINITY);
        }
        let idx = self.table.partition_point(|(b, _)| *b <= xi) - 1;
        let (b, base) = self.table[idx];
        if b == xi {
            return Ok(base);
        }
        let seg_tol = self.tol / (4.0 * (BREAKS as f64 + 2.0));
        Ok(base + adaptive_simpson(|s| integrand(&self.gauge, s), b, xi, seg_tol)?)
    }

    fn signed(&self, psi: f64) -> f64 {
        match self.sign {
            Sign::Plus => psi,
            Sign::Minus => -psi,
        }
    }

    pub fn phi(&self, xi: f64) -> Result<f64, LyapunovError> {
        Ok(self.signed(self.psi(xi)?).exp())
    }

    /// `Phi' = +-Phi / (xi rho + 1)`.
    pub fn phi_prime(&self, xi: f64) -> Result<f64, LyapunovError> {
        let phi = self.phi(xi)?;
        Ok(self.signed(phi / (xi * self.gauge.rho_extended(xi) + 1.0)))
    }

    /// `Phi'' = Phi (1 -+ (rho + xi rho')) / (xi rho + 1)^2`.
    pub fn phi_second(&self, xi: f64) -> Result<f64, LyapunovError> {
        let phi = self.phi(xi)?;
        let rho = self.gauge.rho_extended(xi);
        let drho = self.gauge.rho_prime_extended(xi);
        let d = xi * rho + 1.0;
        let num = match self.sign {
            Sign::Plus => 1.0 - rho - xi * drho,
            Sign::Minus => 1.0 + rho + xi * drho,
        };
        Ok(phi * num / (d * d))
    }

    /// Largest second difference `Phi(a) - 2 Phi(b) + Phi(c)`, scaled by the
    /// grid spacing, over consecutive triples of `grid`.
    pub fn max_second_difference(&self, grid: &[f64]) -> Result<f64, LyapunovError> {
        let vals: Vec<f64> = grid.iter().map(|&x| self.phi(x)).collect::<Result<_, _>>()?;
        let mut worst = f64::NEG_INFINITY;
        for i in 1..grid.len().saturating_sub(1) {
            let (h0, h1) = (grid[i] - grid[i - 1], grid[i + 1] - grid[i]);
            // Divided second difference times the mean spacing, so the test
            // matches the equal-spacing form on uniform grids.
            let dd = 2.0 * ((vals[i + 1] - vals[i]) / h1 - (vals[i] - vals[i - 1]) / h0) / (h0 + h1);
            worst = worst.max(dd * 0.25 * (h0 + h1) * (h0 + h1));
        }
        Ok(worst)
    }

    /// Largest `|Phi(b) - Phi(a) - int_a^b Phi'| / Phi(b)` over consecutive
    /// grid points, with the integral of the closed-form derivative taken by
    /// composite Simpson.
    pub fn derivative_identity_residual(&self, grid: &[f64]) -> Result<f64, LyapunovError> {
        let mut worst = 0.0f64;
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mut err = None;
            let integral = crate::quadrature::composite_simpson(
                |x| match self.phi_prime(x) {
                    Ok(v) => v,
                    Err(e) => {
                        err = Some(e);
                        0.0
                    }
                },
                a,
                b,
                64,
            );
            if let Some(e) = err {
                return Err(e);
            }
            let lhs = self.phi(b)? - self.phi(a)?;
            worst = worst.max((lhs - integral).abs() / self.phi(b)?);
        }
        Ok(worst)
    }

    /// `e^{C t} exp(-(Psi(|x0|^2) - Psi(R^2)))`, the bound on the probability
    /// of entering the ball of radius `R` before `t` from `|x0| > R`.
    pub fn escape_bound(&self, c: f64, t: f64, r_inner: f64, x0_norm: f64) -> Result<f64, LyapunovError> {
        let gap = self.psi(x0_norm * x0_norm)? - self.psi(r_inner * r_inner)?;
        Ok(((c * t) - gap).exp().min(1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::GaugeKind;
    use crate::quadrature::composite_simpson;

    #[test]
    fn psi_at_zero_and_constant_gauge() {
        let p = build_lyapunov(GrowthGauge::constant(1.0), Sign::Plus, 1e-10).unwrap();
        assert_eq!(p.psi(0.0).unwrap(), 0.0);
        assert_eq!(p.phi(0.0).unwrap(), 1.0);
        let e = std::f64::consts::E;
        assert!((p.psi(e - 1.0).unwrap() - 1.0).abs() < 1e-10);
        assert!((p.phi(e - 1.0).unwrap() - e).abs() < 1e-9);
        let m = build_lyapunov(GrowthGauge::constant(1.0), Sign::Minus, 1e-10).unwrap();
        assert_eq!(m.phi(0.0).unwrap(), 1.0);
        assert!((m.phi(e - 1.0).unwrap() - 1.0 / e).abs() < 1e-10);
    }

    #[test]
    fn psi_matches_fine_fixed_rule() {
        let g = GrowthGauge::log_e_plus();
        let p = build_lyapunov(g, Sign::Plus, 1e-10).unwrap();
        let reference = composite_simpson(|s| 1.0 / (s * (std::f64::consts::E + s).ln() + 1.0), 0.0, 10.0, 20_000);
        assert!((p.psi(10.0).unwrap() - reference).abs() < 1e-10);
    }

    #[test]
    fn closed_form_second_derivative_matches_differences() {
        for sign in [Sign::Plus, Sign::Minus] {
            let p = build_lyapunov(GrowthGauge::new(GaugeKind::Log), sign, 1e-12).unwrap();
            for &x in &[0.5, 4.0, 30.0] {
                let h = 1e-3 * x;
                let fd = (p.phi_prime(x + h).unwrap() - p.phi_prime(x - h).unwrap()) / (2.0 * h);
                let d2 = p.phi_second(x).unwrap();
                assert!((fd - d2).abs() < 1e-5 * d2.abs().max(1e-6), "{sign:?} {x}: {fd} vs {d2}");
            }
        }
    }

    #[test]
    fn large_arguments_use_cached_breakpoints() {
        let p = build_lyapunov(GrowthGauge::log_e_plus(), Sign::Plus, 1e-10).unwrap();
        let a = p.psi(1e12).unwrap();
        let b = p.psi(1e12 + 1.0).unwrap();
        assert!(b > a && a.is_finite());
    }

    #[test]
    fn negative_argument_rejected() {
        let p = build_lyapunov(GrowthGauge::log_e_plus(), Sign::Plus, 1e-10).unwrap();
        assert!(p.psi(-1.0).is_err());
        assert!(build_lyapunov(GrowthGauge::log_e_plus(), Sign::Plus, 0.0).is_err());
    }
}
