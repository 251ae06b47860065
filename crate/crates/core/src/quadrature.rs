//! One-dimensional quadrature: adaptive Simpson for smooth integrands and
//! fixed Gauss rules for mark-space integrals.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("adaptive Simpson did not converge on [{a}, {b}] (depth limit {depth})")]
    NoConvergence { a: f64, b: f64, depth: u32 },
    #[error("integrand is not finite at {at}")]
    NonFinite { at: f64 },
}

/// Maximum bisection depth before adaptive Simpson gives up.
pub const MAX_DEPTH: u32 = 60;

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol`.
///
/// Uses the classical `|S(left)+S(right)-S| <= 15 tol` acceptance with the
/// Richardson correction term added on acceptance. `a > b` yields the
/// negated integral.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return adaptive_simpson(f, b, a, tol).map(|v| -v);
    }
    let fa = eval(&f, a)?;
    let fb = eval(&f, b)?;
    let m = 0.5 * (a + b);
    let fm = eval(&f, m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 0)
}

fn eval<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64, QuadratureError> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(QuadratureError::NonFinite { at: x })
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, QuadratureError> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = eval(f, lm)?;
    let frm = eval(f, rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Interval no longer splittable in floating point: accept what we have.
    if !(lm > a && m > lm && rm > m && b > rm) {
        return Ok(left + right);
    }
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= MAX_DEPTH {
        return Err(QuadratureError::NoConvergence { a, b, depth });
    }
    let l = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?;
    Ok(l + r)
}

/// Composite Simpson with `n` (even) panels. Used as an independent
/// fixed-resolution reference in tests and checks.
pub fn composite_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n.max(2) };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "need at least one node");
    let mut out = vec![(0.0, 0.0); n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        out[i] = (-z, w);
        out[n - 1 - i] = (z, w);
    }
    out
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Hermite rule for the standard normal law: nodes `z_i` and weights
/// `w_i` with `sum w_i g(z_i) ~ E[g(Z)]`, `Z ~ N(0, 1)`.
pub fn gauss_hermite_normal(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "need at least one node");
    // Physicists' Hermite roots by Newton on the orthonormal recurrence.
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut nodes = vec![(0.0, 0.0); n];
    let half = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0].0,
            3 => 1.91 * z - 0.91 * nodes[1].0,
            _ => 2.0 * z - nodes[i - 2].0,
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                break;
            }
        }
        let w = 2.0 / (pp * pp);
        nodes[i] = (z, w);
        nodes[n - 1 - i] = (-z, w);
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let mut out: Vec<(f64, f64)> =
        nodes.into_iter().map(|(t, w)| (std::f64::consts::SQRT_2 * t, w / sqrt_pi)).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_log1p_closed_form() {
        let v = adaptive_simpson(|s| 1.0 / (s + 1.0), 0.0, std::f64::consts::E - 1.0, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-11, "{v}");
    }

    #[test]
    fn simpson_reversed_limits_negate() {
        let a = adaptive_simpson(|s| s * s, 0.0, 2.0, 1e-12).unwrap();
        let b = adaptive_simpson(|s| s * s, 2.0, 0.0, 1e-12).unwrap();
        assert_eq!(a, -b);
        assert!((a - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_reports_non_finite() {
        let err = adaptive_simpson(|s| 1.0 / s, 0.0, 1.0, 1e-8).unwrap_err();
        assert!(matches!(err, QuadratureError::NonFinite { .. }));
    }

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(8);
        let sum_w: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((sum_w - 2.0).abs() < 1e-14);
        // degree 14 monomial: integral 2/15
        let v: f64 = rule.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((v - 2.0 / 15.0).abs() < 1e-13, "{v}");
    }

    #[test]
    fn hermite_matches_normal_moments() {
        let rule = gauss_hermite_normal(20);
        let m0: f64 = rule.iter().map(|(_, w)| w).sum();
        let m2: f64 = rule.iter().map(|(z, w)| w * z * z).sum();
        let m4: f64 = rule.iter().map(|(z, w)| w * z.powi(4)).sum();
        let m6: f64 = rule.iter().map(|(z, w)| w * z.powi(6)).sum();
        assert!((m0 - 1.0).abs() < 1e-12, "{m0}");
        assert!((m2 - 1.0).abs() < 1e-12, "{m2}");
        assert!((m4 - 3.0).abs() < 1e-11, "{m4}");
        assert!((m6 - 15.0).abs() < 1e-10, "{m6}");
    }
}
