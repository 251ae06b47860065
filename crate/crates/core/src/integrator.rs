//! Euler-type schemes on a jump-adapted partition, explosion detection and
//! exact solutions for the closed-form fixtures.
//!
//! One step per partition cell:
//! `X <- X + (f - c)~(X) delta + g(X) dW`, and at a jump point
//! `X <- X_- + h(X_-, u)`, where `X_-` is the state after the continuous step
//! that ends at the jump time. The compensator enters as the drift `-c`.
//! Under `TamedEuler` the net drift `b = f - c` is replaced by
//! `b / (1 + dt^alpha |b|)`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::{CoefficientModel, StateVector};
use crate::noise::NoisePath;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegratorError {
    #[error("dimension mismatch ({what}): expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("invalid scheme configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    #[default]
    TamedEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default)]
    pub scheme: Scheme,
    /// Explosion threshold on `|X|`.
    #[serde(default = "default_r_explode")]
    pub r_explode: f64,
    /// Step used in the taming denominator.
    pub dt: f64,
    /// `alpha` in `1 + dt^alpha |b|`.
    #[serde(default = "one")]
    pub taming_exponent: f64,
}

fn default_r_explode() -> f64 {
    1e6
}

fn one() -> f64 {
    1.0
}

impl SchemeConfig {
    pub fn tamed(dt: f64) -> Self {
        SchemeConfig { scheme: Scheme::TamedEuler, r_explode: 1e6, dt, taming_exponent: 1.0 }
    }

    pub fn euler(dt: f64) -> Self {
        SchemeConfig { scheme: Scheme::Euler, ..SchemeConfig::tamed(dt) }
    }

    pub fn with_r_explode(mut self, r: f64) -> Self {
        self.r_explode = r;
        self
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(IntegratorError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.r_explode > 0.0) {
            return Err(IntegratorError::Config(format!("r_explode must be positive, got {}", self.r_explode)));
        }
        if !(self.taming_exponent > 0.0 && self.taming_exponent <= 1.0) {
            return Err(IntegratorError::Config(format!(
                "taming exponent must lie in (0, 1], got {}",
                self.taming_exponent
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplosionKind {
    /// `|X| >= r_explode`.
    Threshold,
    /// The state stopped being finite before crossing the threshold.
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Explosion {
    pub time: f64,
    pub kind: ExplosionKind,
}

/// A jump as seen by the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    /// Index into `Trajectory::times`.
    pub point: usize,
    pub pre: Vec<f64>,
}

/// States at every partition point up to the horizon or the explosion.
///
/// At a jump point the stored state is the post-jump value; the pre-jump
/// value is kept in the matching `JumpEvent`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    jumps: Vec<JumpEvent>,
    explosion: Option<Explosion>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn jumps(&self) -> &[JumpEvent] {
        &self.jumps
    }

    /// Pre-jump state at point `i`, when a jump happened there.
    pub fn pre_jump(&self, i: usize) -> Option<&[f64]> {
        self.jumps.binary_search_by_key(&i, |j| j.point).ok().map(|k| self.jumps[k].pre.as_slice())
    }

    pub fn exploded(&self) -> bool {
        self.explosion.is_some()
    }

    pub fn explosion(&self) -> Option<Explosion> {
        self.explosion
    }

    /// Largest `|X|` over the reported states.
    pub fn sup_norm(&self) -> f64 {
        let mut sup = self.states().map(norm).fold(0.0, f64::max);
        for j in &self.jumps {
            sup = sup.max(norm(&j.pre));
        }
        sup
    }

    /// CSV with columns `t, x0, .., x{m-1}, jump`; a jump time produces a
    /// pre-jump row (`jump = 0`) followed by the post-jump row (`jump = 1`).
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.dim).map(|j| format!("x{j}")));
        header.push("jump".into());
        w.write_record(&header)?;
        let mut next = 0;
        let row = |t: f64, x: &[f64], flag: &str| {
            let mut r = vec![format!("{t:e}")];
            r.extend(x.iter().map(|v| format!("{v:e}")));
            r.push(flag.to_string());
            r
        };
        for i in 0..self.len() {
            if next < self.jumps.len() && self.jumps[next].point == i {
                w.write_record(row(self.times[i], &self.jumps[next].pre, "0"))?;
                w.write_record(row(self.times[i], self.state(i), "1"))?;
                next += 1;
            } else {
                w.write_record(row(self.times[i], self.state(i), "0"))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Trajectories from several initial points on one noise path, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub trajectories: Vec<Trajectory>,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_dims(model: &CoefficientModel, x0: &StateVector, noise: &NoisePath) -> Result<(), IntegratorError> {
    let dim = |what, expected, got| {
        if expected == got {
            Ok(())
        } else {
            Err(IntegratorError::Dimension { what, expected, got })
        }
    };
    dim("initial state", model.dim(), x0.dim())?;
    dim("brownian motion", model.brownian_dim(), noise.brownian_dim())?;
    if !noise.jumps().is_empty() {
        dim("marks", model.marks().dim(), noise.mark_dim())?;
    }
    Ok(())
}

/// Advance the model along `noise` from `x0`.
pub fn simulate(
    model: &CoefficientModel,
    x0: &StateVector,
    noise: &NoisePath,
    cfg: &SchemeConfig,
) -> Result<Trajectory, IntegratorError> {
    cfg.validate()?;
    check_dims(model, x0, noise)?;
    if x0.norm() >= cfg.r_explode {
        return Err(IntegratorError::Config(format!(
            "initial norm {} is not below r_explode = {}",
            x0.norm(),
            cfg.r_explode
        )));
    }
    let coef = model.coefficients();
    let m = model.dim();
    let n = model.brownian_dim();
    let tame = match cfg.scheme {
        Scheme::Euler => None,
        Scheme::TamedEuler => Some(cfg.dt.powf(cfg.taming_exponent)),
    };

    let times = noise.times();
    let mut out_times = Vec::with_capacity(times.len());
    let mut states = Vec::with_capacity(times.len() * m);
    let mut events = Vec::with_capacity(noise.jumps().len());
    let mut x = x0.as_slice().to_vec();
    let mut f = vec![0.0; m];
    let mut c = vec![0.0; m];
    let mut g = vec![0.0; m * n];
    let mut h = vec![0.0; m];
    let mut dw = vec![0.0; n];
    out_times.push(times[0]);
    states.extend_from_slice(&x);
    let mut next_jump = 0;
    let jumps = noise.jumps();
    let mut explosion = None;

    for i in 1..times.len() {
        let delta = times[i] - times[i - 1];
        let (w0, w1) = (noise.w(i - 1), noise.w(i));
        for j in 0..n {
            dw[j] = w1[j] - w0[j];
        }
        coef.drift(&x, &mut f);
        coef.compensator(&x, &mut c);
        if n > 0 {
            coef.diffusion(&x, &mut g);
        }
        for k in 0..m {
            f[k] -= c[k];
        }
        if let Some(scale) = tame {
            let denom = 1.0 + scale * norm(&f);
            for v in &mut f {
                *v /= denom;
            }
        }
        for k in 0..m {
            let mut noise_term = 0.0;
            for j in 0..n {
                noise_term += g[k * n + j] * dw[j];
            }
            x[k] += f[k] * delta + noise_term;
        }
        let t = times[i];
        if next_jump < jumps.len() && jumps[next_jump].point == i {
            if let Some(e) = crossing(&x, t, cfg.r_explode) {
                explosion = Some(e);
                if e.kind == ExplosionKind::Threshold {
                    out_times.push(t);
                    states.extend_from_slice(&x);
                }
                break;
            }
            let pre = x.clone();
            coef.jump(&pre, &jumps[next_jump].mark, &mut h);
            for k in 0..m {
                x[k] += h[k];
            }
            events.push(JumpEvent { point: out_times.len(), pre });
            next_jump += 1;
        }
        if let Some(e) = crossing(&x, t, cfg.r_explode) {
            explosion = Some(e);
            if e.kind == ExplosionKind::Threshold {
                out_times.push(t);
                states.extend_from_slice(&x);
            } else if events.last().is_some_and(|ev| ev.point == out_times.len()) {
                events.pop();
            }
            break;
        }
        out_times.push(t);
        states.extend_from_slice(&x);
    }
    Ok(Trajectory { dim: m, times: out_times, states, jumps: events, explosion })
}

fn crossing(x: &[f64], t: f64, r: f64) -> Option<Explosion> {
    if x.iter().any(|v| !v.is_finite()) {
        return Some(Explosion { time: t, kind: ExplosionKind::Overflow });
    }
    let nx = norm(x);
    if !nx.is_finite() {
        Some(Explosion { time: t, kind: ExplosionKind::Overflow })
    } else if nx >= r {
        Some(Explosion { time: t, kind: ExplosionKind::Threshold })
    } else {
        None
    }
}

/// Coupled trajectories from every point of `x0_list` on the same noise.
pub fn simulate_flow(
    model: &CoefficientModel,
    x0_list: &[StateVector],
    noise: &NoisePath,
    cfg: &SchemeConfig,
) -> Result<TrajectorySet, IntegratorError> {
    if let Some(first) = x0_list.first() {
        if let Some(bad) = x0_list.iter().find(|x| x.dim() != first.dim()) {
            return Err(IntegratorError::Dimension {
                what: "flow initial points",
                expected: first.dim(),
                got: bad.dim(),
            });
        }
    }
    let trajectories = x0_list.par_iter().map(|x0| simulate(model, x0, noise, cfg)).collect::<Result<Vec<_>, _>>()?;
    Ok(TrajectorySet { trajectories })
}

/// `X_t = x0 (1 + a)^{N_t}` at every partition point of `noise`.
pub fn exact_linear_jump(x0: f64, a: f64, noise: &NoisePath) -> Trajectory {
    let times = noise.times().to_vec();
    let mut states = Vec::with_capacity(times.len());
    let mut events = Vec::with_capacity(noise.jumps().len());
    let mut count = 0i32;
    let mut next = 0;
    let jumps = noise.jumps();
    for i in 0..times.len() {
        if next < jumps.len() && jumps[next].point == i {
            events.push(JumpEvent { point: i, pre: vec![x0 * (1.0 + a).powi(count)] });
            count += 1;
            next += 1;
        }
        states.push(x0 * (1.0 + a).powi(count));
    }
    Trajectory { dim: 1, times, states, jumps: events, explosion: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::ModelSpec;
    use crate::noise::{sample_noise, ScenarioSeed};

    fn build(name: &str) -> CoefficientModel {
        ModelSpec::builtin(name).build().unwrap()
    }

    #[test]
    fn zero_model_is_constant() {
        let model = build("zero");
        let noise = sample_noise(ScenarioSeed::new(1, 0), 1.0, 0.01, model.brownian_dim(), model.marks()).unwrap();
        let x0 = StateVector::new(vec![0.3; model.dim()]).unwrap();
        let tr = simulate(&model, &x0, &noise, &SchemeConfig::tamed(0.01)).unwrap();
        assert!(tr.states().all(|s| s == x0.as_slice()));
        assert!(!tr.exploded());
    }

    #[test]
    fn flip_matches_exact_solution() {
        let model = build("pure_jump_flip");
        for path in 0..20 {
            let noise =
                sample_noise(ScenarioSeed::new(3, path), 1.0, 0.01, model.brownian_dim(), model.marks()).unwrap();
            let x0 = StateVector::scalar(5.0).unwrap();
            let tr = simulate(&model, &x0, &noise, &SchemeConfig::tamed(0.01)).unwrap();
            let exact = exact_linear_jump(5.0, -1.0, &noise);
            assert_eq!(tr.times(), exact.times());
            for i in 0..tr.len() {
                assert_eq!(tr.state(i), exact.state(i));
            }
            for (i, &t) in tr.times().iter().enumerate() {
                let first = noise.jumps().first().map_or(f64::INFINITY, |j| j.time);
                assert_eq!(tr.state(i)[0], if first > t { 5.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn quadratic_drift_explodes_near_one() {
        let model = build("quadratic_drift");
        let noise = sample_noise(ScenarioSeed::new(0, 0), 1.1, 1e-4, model.brownian_dim(), model.marks()).unwrap();
        let x0 = StateVector::scalar(1.0).unwrap();
        let tr = simulate(&model, &x0, &noise, &SchemeConfig::euler(1e-4)).unwrap();
        let e = tr.explosion().unwrap();
        assert!(e.time >= 0.9 && e.time <= 1.05, "{}", e.time);
        assert!(tr.times().last().unwrap() <= &e.time);
    }

    #[test]
    fn csv_has_pre_and_post_rows() {
        let model = build("pure_jump_flip");
        let noise = (0..)
            .map(|p| sample_noise(ScenarioSeed::new(4, p), 1.0, 0.25, model.brownian_dim(), model.marks()).unwrap())
            .find(|n| !n.jumps().is_empty())
            .unwrap();
        let tr = simulate(&model, &StateVector::scalar(2.0).unwrap(), &noise, &SchemeConfig::tamed(0.25)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x0,jump\n"));
        assert!(text.contains(",2e0,0\n") && text.contains(",0e0,1\n"));
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = build("zero");
        let noise = sample_noise(ScenarioSeed::new(1, 0), 1.0, 0.1, model.brownian_dim(), model.marks()).unwrap();
        let x0 = StateVector::new(vec![0.0; model.dim() + 1]).unwrap();
        assert!(simulate(&model, &x0, &noise, &SchemeConfig::tamed(0.1)).is_err());
        let x0 = StateVector::new(vec![2e6; model.dim()]).unwrap();
        assert!(simulate(&model, &x0, &noise, &SchemeConfig::tamed(0.1)).is_err());
    }
}
