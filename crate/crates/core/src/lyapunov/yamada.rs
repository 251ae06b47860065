//! Levels `1 = a_0 > a_1 > ...` with `int_{a_n}^{a_{n-1}} du / r^2 = n`
//! and the `C^2` smoothers `psi_n` approximating `x^+`.
//!
//! Integrals of `1/r^2` are taken in the variable `v = log u`, where the
//! integrand `e^v / r(e^v)^2` stays tame even when `r` vanishes at 0.
//!
//! `phi_n` is placed in the cumulative-mass coordinate
//! `G(u) = int_{a_n}^u dv / r^2`, which runs from 0 to `n` over the level
//! interval: `phi_n(u) = s B(G(u)/n) 2 / (n r(u)^2)` with a plateau bump `B`
//! that vanishes outside `[0.05, 0.95]` and `s = 1 / (2 int B)`. This gives
//! `int phi_n = 1` and `r^2 phi_n <= 2s/n < 2/n` exactly, and
//! `psi_n' = 2s I_B(G/n)` in closed form given `G`.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use super::LyapunovError;
use crate::quadrature::{adaptive_simpson, gauss_legendre};

type ModulusFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A modulus `r` on `(0, 1]`, nondecreasing and positive.
#[derive(Clone)]
pub struct Modulus {
    name: String,
    f: Arc<ModulusFn>,
}

impl Modulus {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Modulus { name: name.into(), f: Arc::new(f) }
    }

    /// `r(u) = u`.
    pub fn linear() -> Self {
        Modulus::new("u", |u| u)
    }

    /// `r(u) = sqrt(u)`.
    pub fn sqrt() -> Self {
        Modulus::new("sqrt(u)", f64::sqrt)
    }

    pub fn from_shape(shape: crate::coefficients::ModulusShape, scale: f64) -> Self {
        Modulus::new(format!("{scale}*{shape:?}"), move |u| scale * shape.eval(u))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }
}

impl fmt::Debug for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Modulus({})", self.name)
    }
}

const RAMP_LO: f64 = 0.05;
const RAMP_W: f64 = 0.2;
const BUMP_MASS: f64 = 0.7;
const SCALE: f64 = 1.0 / (2.0 * BUMP_MASS);

/// Segments of the cached node grid per level interval.
const SEGMENTS: usize = 256;
const GL_ORDER: usize = 12;

/// Smallest `log u` the level search will consider (below the least
/// positive subnormal the map `u -> e^v` underflows).
const LOG_FLOOR: f64 = -744.0;

fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// `int_0^t smoothstep5`.
fn smoothstep5_integral(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    let t4 = t * t * t * t;
    t4 * (t * t - 3.0 * t + 2.5)
}

/// The plateau bump on `[0, 1]`.
pub(crate) fn bump(t: f64) -> f64 {
    if t <= RAMP_LO || t >= 1.0 - RAMP_LO {
        0.0
    } else if t < RAMP_LO + RAMP_W {
        smoothstep5((t - RAMP_LO) / RAMP_W)
    } else if t <= 1.0 - RAMP_LO - RAMP_W {
        1.0
    } else {
        smoothstep5((1.0 - RAMP_LO - t) / RAMP_W)
    }
}

/// `int_0^t bump`.
pub(crate) fn bump_integral(t: f64) -> f64 {
    let half = 0.5 * RAMP_W;
    if t <= RAMP_LO {
        0.0
    } else if t < RAMP_LO + RAMP_W {
        RAMP_W * smoothstep5_integral((t - RAMP_LO) / RAMP_W)
    } else if t <= 1.0 - RAMP_LO - RAMP_W {
        half + (t - RAMP_LO - RAMP_W)
    } else if t < 1.0 - RAMP_LO {
        BUMP_MASS - RAMP_W * smoothstep5_integral((1.0 - RAMP_LO - t) / RAMP_W)
    } else {
        BUMP_MASS
    }
}

fn log_integrand(r: &Modulus, v: f64) -> f64 {
    let u = v.exp();
    let ru = r.eval(u);
    u / (ru * ru)
}

/// `int_{lo}^{hi} du / r^2` by Gauss–Legendre in `log u`.
fn mass_gl(r: &Modulus, lo: f64, hi: f64, rule: &[(f64, f64)]) -> f64 {
    let (a, b) = (lo.ln(), hi.ln());
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    rule.iter().map(|(z, w)| w * h * log_integrand(r, c + h * z)).sum()
}

/// One smoother `psi_n` with cached nodes over `[a_n, a_{n-1}]`.
#[derive(Debug, Clone)]
pub struct Smoother {
    n: usize,
    lo: f64,
    hi: f64,
    r: Modulus,
    /// Node positions (geometric), `G` and `psi` at the nodes.
    nodes: Vec<f64>,
    g: Vec<f64>,
    psi: Vec<f64>,
    /// `n / (raw quadrature mass)`, so that `G(a_{n-1}) = n` exactly.
    fix: f64,
    rule: Arc<Vec<(f64, f64)>>,
}

impl Smoother {
    fn build(n: usize, lo: f64, hi: f64, r: &Modulus, rule: Arc<Vec<(f64, f64)>>) -> Result<Self, LyapunovError> {
        let ratio = hi / lo;
        let nodes: Vec<f64> = (0..=SEGMENTS)
            .map(|k| if k == SEGMENTS { hi } else { lo * ratio.powf(k as f64 / SEGMENTS as f64) })
            .collect();
        let mut g = vec![0.0; nodes.len()];
        for k in 1..nodes.len() {
            g[k] = g[k - 1] + mass_gl(r, nodes[k - 1], nodes[k], &rule);
        }
        let total = g[SEGMENTS];
        if !(total.is_finite() && total > 0.0) {
            return Err(LyapunovError::Construction { n, reason: format!("mass {total} on level interval") });
        }
        let fix = n as f64 / total;
        g.iter_mut().for_each(|v| *v *= fix);
        let mut sm = Smoother { n, lo, hi, r: r.clone(), nodes, g, psi: Vec::new(), fix, rule };
        let mut psi = vec![0.0; sm.nodes.len()];
        for k in 1..sm.nodes.len() {
            let (a, b) = (sm.nodes[k - 1], sm.nodes[k]);
            let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
            let seg: f64 = sm.rule.iter().map(|(z, w)| w * h * sm.first_in(k - 1, c + h * z)).sum();
            psi[k] = psi[k - 1] + seg;
        }
        sm.psi = psi;
        Ok(sm)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Support interval `(a_n, a_{n-1})` of `psi_n''`.
    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn segment(&self, x: f64) -> usize {
        (self.nodes.partition_point(|v| *v <= x) - 1).min(SEGMENTS - 1)
    }

    fn g_in(&self, k: usize, x: f64) -> f64 {
        let a = self.nodes[k];
        if x <= a {
            return self.g[k];
        }
        self.g[k] + mass_gl(&self.r, a, x, &self.rule) * self.fix
    }

    fn first_in(&self, k: usize, x: f64) -> f64 {
        2.0 * SCALE * bump_integral(self.g_in(k, x) / self.n as f64)
    }

    /// `G(x) = int_{a_n}^x du / r^2`, clamped to `[0, n]`.
    pub fn mass(&self, x: f64) -> f64 {
        if x <= self.lo {
            0.0
        } else if x >= self.hi {
            self.n as f64
        } else {
            self.g_in(self.segment(x), x)
        }
    }

    /// `phi_n(x) = psi_n''(x)`.
    pub fn second(&self, x: f64) -> f64 {
        if x <= self.lo || x >= self.hi {
            return 0.0;
        }
        let rx = self.r.eval(x);
        SCALE * bump(self.mass(x) / self.n as f64) * 2.0 / (self.n as f64 * rx * rx)
    }

    pub fn first(&self, x: f64) -> f64 {
        if x <= self.lo {
            0.0
        } else if x >= self.hi {
            1.0
        } else {
            self.first_in(self.segment(x), x)
        }
    }

    /// `psi_n(x)`; zero for `x <= a_n`, `x - const` for `x >= a_{n-1}`.
    pub fn value(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return self.psi[SEGMENTS] + (x - self.hi);
        }
        let k = self.segment(x);
        let a = self.nodes[k];
        let (c, h) = (0.5 * (a + x), 0.5 * (x - a));
        self.psi[k] + self.rule.iter().map(|(z, w)| w * h * self.first_in(k, c + h * z)).sum::<f64>()
    }

    /// `x - psi_n(x)` for `x >= a_{n-1}`.
    pub fn offset(&self) -> f64 {
        self.hi - self.psi[SEGMENTS]
    }
}

/// Levels and smoothers for `n = 1 ..= n_max`.
#[derive(Debug, Clone)]
pub struct YamadaSequence {
    r: Modulus,
    tol: f64,
    levels: Vec<f64>,
    smoothers: Vec<Smoother>,
}

/// Solve the levels by bisection in `log a` (relative tolerance 1e-12) and
/// build every smoother.
///
/// Fails with a construction error when a level cannot be reached, i.e.
/// `int_0^{a_{n-1}} du / r^2 < n` within floating-point range.
pub fn build_yamada_sequence(r: Modulus, n_max: usize, tol: f64) -> Result<YamadaSequence, LyapunovError> {
    if n_max == 0 {
        return Err(LyapunovError::Argument("n_max must be at least 1".into()));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(LyapunovError::Argument(format!("tolerance must be positive, got {tol}")));
    }
    for &u in &[1e-12, 1e-6, 0.5, 1.0] {
        let v = r.eval(u);
        if !(v.is_finite() && v > 0.0) {
            return Err(LyapunovError::Argument(format!("modulus must be positive on (0, 1], r({u}) = {v}")));
        }
    }
    let rule = Arc::new(gauss_legendre(GL_ORDER));
    let mut levels: Vec<f64> = vec![1.0];
    let mut smoothers = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let prev = levels[n - 1];
        let target = n as f64;
        let vt = prev.ln();
        let mass_from = |v: f64| -> Result<f64, LyapunovError> {
            let q_tol = tol.min(1e-13 * target);
            Ok(adaptive_simpson(|s| log_integrand(&r, s), v, vt, q_tol)?)
        };
        // Bracket: grow the step downward in log u until the mass exceeds n.
        let mut hi_v = vt;
        let mut step = 1.0;
        let mut lo_v = vt - step;
        loop {
            if lo_v < LOG_FLOOR {
                lo_v = LOG_FLOOR;
            }
            let m = mass_from(lo_v)?;
            if m >= target {
                break;
            }
            if lo_v <= LOG_FLOOR {
                return Err(LyapunovError::Construction {
                    n,
                    reason: format!(
                        "int du/r^2 over [{:e}, {prev:e}] is {m}, below {target}; the modulus does not \
                         diverge fast enough at 0 within floating-point range",
                        lo_v.exp()
                    ),
                });
            }
            hi_v = lo_v;
            step *= 2.0;
            lo_v = vt - step;
        }
        // Bisection in log a: relative precision of a is |dv|.
        while hi_v - lo_v > 1e-13 {
            let mid = 0.5 * (lo_v + hi_v);
            if mid <= lo_v || mid >= hi_v {
                break;
            }
            if mass_from(mid)? >= target {
                lo_v = mid;
            } else {
                hi_v = mid;
            }
        }
        let a_n = (0.5 * (lo_v + hi_v)).exp();
        if !(a_n > 0.0 && a_n < prev) {
            return Err(LyapunovError::Construction { n, reason: format!("level {a_n:e} underflows") });
        }
        levels.push(a_n);
        smoothers.push(Smoother::build(n, a_n, prev, &r, rule.clone())?);
    }
    Ok(YamadaSequence { r, tol, levels, smoothers })
}

impl YamadaSequence {
    pub fn modulus(&self) -> &Modulus {
        &self.r
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// `a_0 = 1, a_1, ..., a_{n_max}`.
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn n_max(&self) -> usize {
        self.smoothers.len()
    }

    /// Smoother `psi_n` for `1 <= n <= n_max`.
    pub fn smoother(&self, n: usize) -> &Smoother {
        &self.smoothers[n - 1]
    }

    /// `int_{a_n}^{a_{n-1}} du / r^2` recomputed by adaptive quadrature.
    pub fn level_mass(&self, n: usize) -> Result<f64, LyapunovError> {
        let (lo, hi) = (self.levels[n].ln(), self.levels[n - 1].ln());
        Ok(adaptive_simpson(|v| log_integrand(&self.r, v), lo, hi, self.tol.min(1e-13 * n as f64))?)
    }

    /// Write `n, a_n` rows.
    pub fn write_levels_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "a_n"])?;
        for (n, a) in self.levels.iter().enumerate() {
            w.write_record([n.to_string(), format!("{a:e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write `x, psi_n, psi_n', psi_n''` at the given points.
    pub fn write_smoother_csv<W: Write>(&self, n: usize, xs: &[f64], out: W) -> csv::Result<()> {
        let s = self.smoother(n);
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "psi", "psi_prime", "psi_second"])?;
        for &x in xs {
            w.write_record([
                format!("{x:e}"),
                format!("{:e}", s.value(x)),
                format!("{:e}", s.first(x)),
                format!("{:e}", s.second(x)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn dump_levels(&self, path: &Path) -> std::io::Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_levels_csv(f).map_err(std::io::Error::other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_has_expected_mass() {
        let n = 200_000;
        let h = 1.0 / n as f64;
        let riemann: f64 = (0..n).map(|i| bump((i as f64 + 0.5) * h) * h).sum();
        assert!((riemann - BUMP_MASS).abs() < 1e-9);
        assert!((bump_integral(1.0) - BUMP_MASS).abs() < 1e-15);
        for &t in &[0.1, 0.3, 0.6, 0.8, 0.9] {
            let m = (t / h) as usize;
            let partial: f64 = (0..m).map(|i| bump((i as f64 + 0.5) * h) * h).sum();
            assert!((partial - bump_integral(m as f64 * h)).abs() < 1e-9, "{t}");
        }
    }

    #[test]
    fn linear_modulus_levels() {
        let y = build_yamada_sequence(Modulus::linear(), 6, 1e-12).unwrap();
        for n in 1..=6 {
            let exact = 1.0 / (1.0 + (n * (n + 1)) as f64 / 2.0);
            assert!((y.levels()[n] - exact).abs() < 1e-12, "{n}");
        }
    }

    #[test]
    fn sqrt_modulus_levels() {
        let y = build_yamada_sequence(Modulus::sqrt(), 8, 1e-12).unwrap();
        for n in 1..=8 {
            let exact = (-((n * (n + 1)) as f64) / 2.0).exp();
            assert!((y.levels()[n] - exact).abs() <= 1e-12 * exact.max(1e-300) + 1e-300, "{n}");
        }
    }

    #[test]
    fn smoother_shape() {
        let y = build_yamada_sequence(Modulus::linear(), 4, 1e-12).unwrap();
        for n in 1..=4 {
            let s = y.smoother(n);
            let (lo, hi) = s.interval();
            assert_eq!(s.value(-1.0), 0.0);
            assert_eq!(s.value(lo), 0.0);
            assert!((s.first(hi * (1.0 - 1e-12)) - 1.0).abs() < 1e-9);
            let c = s.offset();
            assert!(c >= 0.0 && c <= hi, "{c}");
            assert!((s.value(2.0) - (2.0 - c)).abs() < 1e-14);
        }
    }

    #[test]
    fn smoother_derivatives_are_consistent() {
        let y = build_yamada_sequence(Modulus::sqrt(), 3, 1e-12).unwrap();
        let s = y.smoother(3);
        let (lo, hi) = s.interval();
        for k in 1..40 {
            let x = lo * (hi / lo).powf(k as f64 / 40.0);
            let h = 1e-6 * x;
            let d1 = (s.value(x + h) - s.value(x - h)) / (2.0 * h);
            assert!((d1 - s.first(x)).abs() < 1e-6, "first at {x}");
            let d2 = (s.first(x + h) - s.first(x - h)) / (2.0 * h);
            assert!((d2 - s.second(x)).abs() < 1e-5 * s.second(x).abs().max(1.0), "second at {x}");
        }
    }

    #[test]
    fn non_divergent_modulus_fails_to_construct() {
        let r = Modulus::new("u^0.4", |u| u.powf(0.4));
        match build_yamada_sequence(r, 10, 1e-10) {
            Err(LyapunovError::Construction { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn levels_csv_has_header() {
        let y = build_yamada_sequence(Modulus::linear(), 2, 1e-12).unwrap();
        let mut buf = Vec::new();
        y.write_levels_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,a_n\n0,1e0\n"));
    }
}
