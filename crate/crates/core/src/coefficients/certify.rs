//! Sampling-based certification of the coefficient assumptions.
//!
//! Every check evaluates the inequalities over an explicit sample and
//! reports the region it covered together with the worst pair or point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::marks::norm;
use super::{CoefficientError, CoefficientModel, GaugeKind, GrowthGauge, JumpHomeoCertificate};
use crate::report::Verdict;
use crate::stats::LinearFit;

/// Candidate exponents `sigma`, tried from the largest down.
pub const SIGMA_GRID: [f64; 7] = [2.0, 1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125];

/// Largest admissible log-log growth of a fitted constant between the two
/// largest `N`.
const GROWTH_SLOPE_LIMIT: f64 = 0.5;

/// Growth-check tail slope above which the ratio is deemed unbounded.
const TAIL_SLOPE_LIMIT: f64 = 0.1;

const MARK_NODES: usize = 32;

struct Evaluator<'a> {
    model: &'a CoefficientModel,
    nodes: Vec<(f64, Vec<f64>)>,
}

struct Values {
    f: Vec<f64>,
    g: Vec<f64>,
    /// `h(x, u_q)` for every mark node, concatenated.
    h: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(model: &'a CoefficientModel, nodes: usize) -> Self {
        let nodes = if model.marks().total_mass() > 0.0 { model.marks().quadrature(nodes) } else { Vec::new() };
        Evaluator { model, nodes }
    }

    fn eval(&self, x: &[f64]) -> Values {
        let c = self.model.coefficients();
        let m = self.model.dim();
        let mut f = vec![0.0; m];
        let mut g = vec![0.0; m * self.model.brownian_dim()];
        let mut h = vec![0.0; m * self.nodes.len()];
        c.drift(x, &mut f);
        c.diffusion(x, &mut g);
        for (q, (_, u)) in self.nodes.iter().enumerate() {
            c.jump(x, u, &mut h[q * m..(q + 1) * m]);
        }
        Values { f, g, h }
    }

    fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().map(|(w, _)| *w)
    }
}

fn all_finite(v: &Values) -> Option<&'static str> {
    if v.f.iter().any(|x| !x.is_finite()) {
        Some("drift")
    } else if v.g.iter().any(|x| !x.is_finite()) {
        Some("diffusion")
    } else if v.h.iter().any(|x| !x.is_finite()) {
        Some("jump")
    } else {
        None
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    if dim == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

// ---------------------------------------------------------------------------
// Growth
// ---------------------------------------------------------------------------

/// Radii and directions at which the growth inequalities are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSampleSpec {
    pub radii: Vec<f64>,
    /// Random directions per radius in dimension > 1 (both signs in 1D).
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_directions() -> usize {
    8
}

impl GrowthSampleSpec {
    /// `count` radii spaced geometrically over `[r_min, r_max]`.
    pub fn geometric(r_min: f64, r_max: f64, count: usize) -> Self {
        let count = count.max(2);
        let radii = (0..count).map(|i| r_min * (r_max / r_min).powf(i as f64 / (count - 1) as f64)).collect();
        GrowthSampleSpec { radii, directions: default_directions(), seed: 0 }
    }

    /// Default grid `1e-3 ..= 1e8`, raised to start at `sqrt(K)` for gauges
    /// defined on `[K, inf)`.
    pub fn for_gauge(gauge: &GrowthGauge) -> Self {
        let lo = 1e-3f64.max(gauge.threshold().sqrt() * (1.0 + 1e-12));
        GrowthSampleSpec::geometric(lo, 1e8, 45)
    }
}

impl Default for GrowthSampleSpec {
    fn default() -> Self {
        GrowthSampleSpec::geometric(1e-3, 1e8, 45)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthWitness {
    pub x: Vec<f64>,
    pub component: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub model: String,
    pub gauge: GaugeKind,
    pub dim: usize,
    pub radius_min: f64,
    pub radius_max: f64,
    pub samples: usize,
    pub c_drift: f64,
    pub c_diffusion: f64,
    pub c_jump: f64,
    /// `max(1, sup ratio)` over the sample.
    pub c_fit: f64,
    /// OLS slope of `log max-ratio` against `log r` over the upper half of radii.
    pub tail_slope: f64,
    pub verdict: Verdict,
    pub witness: Option<GrowthWitness>,
}

/// Evaluate `|f| / (|x| rho + 1)`, `||g||^2 / (|x|^2 rho + 1)` and
/// `int |h|^2 dmu / (|x|^2 rho + 1)` with `rho = rho(|x|^2)` over the sample.
pub fn check_growth_assumption(
    model: &CoefficientModel,
    gauge: &GrowthGauge,
    spec: &GrowthSampleSpec,
) -> Result<GrowthReport, CoefficientError> {
    if spec.radii.len() < 2 || spec.radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(CoefficientError::Config("growth sample needs at least two positive radii".into()));
    }
    let mut radii = spec.radii.clone();
    radii.sort_by(f64::total_cmp);
    for &r in &radii {
        gauge.rho(r * r)?;
    }
    let dim = model.dim();
    let ev = Evaluator::new(model, MARK_NODES);
    let weights: Vec<f64> = ev.weights().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut c = [0.0f64; 3];
    let mut per_radius = Vec::with_capacity(radii.len());
    let mut witness: Option<GrowthWitness> = None;
    let mut non_finite: Option<GrowthWitness> = None;
    let mut samples = 0;
    for &r in &radii {
        let rho = gauge.rho(r * r)?;
        let dirs: Vec<Vec<f64>> = if dim == 1 {
            vec![vec![1.0], vec![-1.0]]
        } else {
            (0..spec.directions.max(1)).map(|_| random_unit(&mut rng, dim)).collect()
        };
        let mut best = 0.0f64;
        for d in dirs {
            let x: Vec<f64> = d.iter().map(|v| v * r).collect();
            let v = ev.eval(&x);
            samples += 1;
            let fr = norm(&v.f) / (r * rho + 1.0);
            let gr = v.g.iter().map(|a| a * a).sum::<f64>() / (r * r * rho + 1.0);
            let hr = weights
                .iter()
                .enumerate()
                .map(|(q, w)| w * v.h[q * dim..(q + 1) * dim].iter().map(|a| a * a).sum::<f64>())
                .sum::<f64>()
                / (r * r * rho + 1.0);
            for (k, (ratio, name)) in [(fr, "drift"), (gr, "diffusion"), (hr, "jump")].into_iter().enumerate() {
                if !ratio.is_finite() {
                    if non_finite.is_none() {
                        non_finite = Some(GrowthWitness { x: x.clone(), component: name.into(), ratio });
                    }
                    continue;
                }
                c[k] = c[k].max(ratio);
                if ratio > best {
                    best = ratio;
                }
                if witness.as_ref().is_none_or(|w| ratio > w.ratio) {
                    witness = Some(GrowthWitness { x: x.clone(), component: name.into(), ratio });
                }
            }
        }
        per_radius.push(best);
    }
    let half = radii.len() / 2;
    let lx: Vec<f64> = radii[half..].iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = per_radius[half..].iter().map(|v| v.max(1e-300).ln()).collect();
    let tail_slope = LinearFit::ols(&lx, &ly).map_or(0.0, |f| f.slope);
    let fail = non_finite.is_some() || tail_slope > TAIL_SLOPE_LIMIT;
    let c_fit = c.iter().fold(1.0f64, |a, b| a.max(*b));
    Ok(GrowthReport {
        model: model.name().to_string(),
        gauge: gauge.kind,
        dim,
        radius_min: radii[0],
        radius_max: radii[radii.len() - 1],
        samples,
        c_drift: c[0],
        c_diffusion: c[1],
        c_jump: c[2],
        c_fit,
        tail_slope,
        verdict: Verdict::from_bool(!fail),
        witness: if fail { non_finite.or(witness) } else { witness },
    })
}

// ---------------------------------------------------------------------------
// Pair sampling
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairDomain {
    /// All of the ball `|x| <= N`.
    Symmetric,
    /// Only points with non-negative components.
    Nonnegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    /// `N^-3 <= |x|, |y| <= 1/N`, plus the origin.
    NearZero,
    /// `1/N <= |x|, |y| <= N`, log-uniform radii.
    Bulk,
    /// `y` within a relative distance `1e-8 ..= 1e-2` of `x`.
    Close,
    /// `N/2 <= |x|, |y| <= N`.
    NearBoundary,
    /// Pairs straddling the unit sphere, including points exactly on it.
    UnitShell,
}

const ALL_CLASSES: [PairClass; 5] =
    [PairClass::NearZero, PairClass::Bulk, PairClass::Close, PairClass::NearBoundary, PairClass::UnitShell];

/// Draws point pairs inside `|x|, |y| <= N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSampler {
    pub per_class: usize,
    #[serde(default = "default_domain")]
    pub domain: PairDomain,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_classes")]
    pub classes: Vec<PairClass>,
}

fn default_domain() -> PairDomain {
    PairDomain::Symmetric
}

fn default_classes() -> Vec<PairClass> {
    ALL_CLASSES.to_vec()
}

impl Default for PairSampler {
    fn default() -> Self {
        PairSampler::new(200, 0)
    }
}

impl PairSampler {
    pub fn new(per_class: usize, seed: u64) -> Self {
        PairSampler { per_class, domain: PairDomain::Symmetric, seed, classes: default_classes() }
    }

    pub fn with_domain(mut self, domain: PairDomain) -> Self {
        self.domain = domain;
        self
    }

    fn point(&self, rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
        let d = random_unit(rng, dim);
        self.project(d.into_iter().map(|v| v * radius).collect())
    }

    fn project(&self, x: Vec<f64>) -> Vec<f64> {
        match self.domain {
            PairDomain::Symmetric => x,
            PairDomain::Nonnegative => x.into_iter().map(f64::abs).collect(),
        }
    }

    /// Pairs for level `n` in dimension `dim`, tagged by class.
    pub fn pairs(&self, n: f64, dim: usize) -> Vec<(PairClass, Vec<f64>, Vec<f64>)> {
        let mut out = Vec::new();
        let axis = |s: f64| {
            let mut v = vec![0.0; dim];
            v[0] = s;
            v
        };
        for (ci, &class) in self.classes.iter().enumerate() {
            let seed = self.seed ^ n.to_bits().rotate_left(13) ^ (ci as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut fixed: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
            match class {
                PairClass::NearZero => {
                    fixed.push((axis(0.0), axis(1.0 / n)));
                    fixed.push((axis(0.0), axis(n.powi(-3))));
                    fixed.push((axis(1.0 / n), axis(-1.0 / n)));
                }
                PairClass::UnitShell => {
                    fixed.push((axis(1.0), axis(1.0 + 1e-6)));
                    fixed.push((axis(-1.0), axis(-1.0 + 1e-6)));
                    fixed.push((axis(1.0), axis(-1.0)));
                }
                PairClass::NearBoundary => fixed.push((axis(n), axis(-n))),
                _ => {}
            }
            for (x, y) in fixed {
                out.push((class, self.project(x), self.project(y)));
            }
            for _ in 0..self.per_class {
                let (x, y) = match class {
                    PairClass::NearZero => {
                        let lo = n.powi(-3);
                        let hi = 1.0 / n;
                        (
                            {
                                let r = log_uniform(&mut rng, lo, hi);
                                self.point(&mut rng, dim, r)
                            },
                            {
                                let r = log_uniform(&mut rng, lo, hi);
                                self.point(&mut rng, dim, r)
                            },
                        )
                    }
                    PairClass::Bulk => (
                        {
                            let r = log_uniform(&mut rng, 1.0 / n, n);
                            self.point(&mut rng, dim, r)
                        },
                        {
                            let r = log_uniform(&mut rng, 1.0 / n, n);
                            self.point(&mut rng, dim, r)
                        },
                    ),
                    PairClass::Close => {
                        let x = {
                            let r = log_uniform(&mut rng, 1.0 / n, n);
                            self.point(&mut rng, dim, r)
                        };
                        let rel = log_uniform(&mut rng, 1e-8, 1e-2);
                        let r = norm(&x);
                        let d = random_unit(&mut rng, dim);
                        let mut y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + rel * r * b).collect();
                        let ny = norm(&y);
                        if ny > n {
                            y.iter_mut().for_each(|v| *v *= n / ny);
                        }
                        (x, self.project(y))
                    }
                    PairClass::NearBoundary => (
                        {
                            let r = n * (0.5 + 0.5 * rng.random::<f64>());
                            self.point(&mut rng, dim, r)
                        },
                        {
                            let r = n * (0.5 + 0.5 * rng.random::<f64>());
                            self.point(&mut rng, dim, r)
                        },
                    ),
                    PairClass::UnitShell => {
                        let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        let rx = 1.0 + s * log_uniform(&mut rng, 1e-10, 0.5);
                        let ry = 1.0 + s * log_uniform(&mut rng, 1e-10, 0.5);
                        let d = random_unit(&mut rng, dim);
                        let x: Vec<f64> = d.iter().map(|v| v * rx).collect();
                        let y: Vec<f64> = d.iter().map(|v| v * ry).collect();
                        (self.project(x), self.project(y))
                    }
                };
                out.push((class, x, y));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Log-Lipschitz
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairWitness {
    pub n: f64,
    pub class: PairClass,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub component: String,
    /// Constant this pair alone forces (infinite for non-finite coefficients).
    pub ratio: f64,
}

/// Required constants for one `sigma` across the `N` ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaFit {
    pub sigma: f64,
    pub n_list: Vec<f64>,
    pub c_f: Vec<f64>,
    pub c_g: Vec<f64>,
    /// `c_h[k][i]`: constant for `p_list[k]` at `n_list[i]`.
    pub c_h: Vec<Vec<f64>>,
    /// Log-log growth of each constant between the last two `N`, in the
    /// order f, g, then h for every p.
    pub growth: Vec<f64>,
    pub accepted: bool,
    pub worst: Option<PairWitness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLipschitzCertificate {
    #[serde(rename = "C")]
    pub c: f64,
    pub sigma: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub p_list: Vec<f64>,
    /// `(p, C(p))`.
    pub c_of_p: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLipschitzReport {
    pub model: String,
    pub dim: usize,
    pub domain: PairDomain,
    pub pairs_per_level: usize,
    pub certificate: LogLipschitzCertificate,
    pub fits: Vec<SigmaFit>,
}

struct PairData {
    class: PairClass,
    x: Vec<f64>,
    y: Vec<f64>,
    d: f64,
    df: f64,
    dg2: f64,
    /// `int |dh|^{2p} dmu` for every p.
    dh: Vec<f64>,
}

fn pair_data(ev: &Evaluator<'_>, n: f64, sampler: &PairSampler, p_list: &[f64]) -> Result<Vec<PairData>, PairWitness> {
    let dim = ev.model.dim();
    let weights: Vec<f64> = ev.weights().collect();
    let mut out = Vec::new();
    for (class, x, y) in sampler.pairs(n, dim) {
        let vx = ev.eval(&x);
        let vy = ev.eval(&y);
        for (v, at) in [(&vx, &x), (&vy, &y)] {
            if let Some(component) = all_finite(v) {
                return Err(PairWitness {
                    n,
                    class,
                    x: at.clone(),
                    y: at.clone(),
                    component: component.into(),
                    ratio: f64::INFINITY,
                });
            }
        }
        let dh = p_list
            .iter()
            .map(|&p| {
                weights
                    .iter()
                    .enumerate()
                    .map(|(q, w)| {
                        let s = q * dim..(q + 1) * dim;
                        w * sq_dist(&vx.h[s.clone()], &vy.h[s]).powf(p)
                    })
                    .sum()
            })
            .collect();
        out.push(PairData {
            class,
            d: sq_dist(&x, &y).sqrt(),
            df: sq_dist(&vx.f, &vy.f).sqrt(),
            dg2: sq_dist(&vx.g, &vy.g),
            dh,
            x,
            y,
        });
    }
    Ok(out)
}

fn validate_levels(n_list: &[f64], p_list: &[f64]) -> Result<(), CoefficientError> {
    if n_list.len() < 2 {
        return Err(CoefficientError::Config("log-Lipschitz fit needs at least two levels N".into()));
    }
    if let Some(n) = n_list.iter().find(|n| !(n.is_finite() && **n > std::f64::consts::E)) {
        return Err(CoefficientError::Config(format!("every level N must exceed e, got {n}")));
    }
    if let Some(p) = p_list.iter().find(|p| !(p.is_finite() && **p >= 1.0)) {
        return Err(CoefficientError::Config(format!("exponents p must be >= 1, got {p}")));
    }
    Ok(())
}

/// Constants required at every `sigma` of [`SIGMA_GRID`] and every `N`.
///
/// A coefficient that is not finite at a sampled point refutes the
/// assumption outright.
pub fn fit_log_lipschitz(
    model: &CoefficientModel,
    n_list: &[f64],
    sampler: &PairSampler,
    p_list: &[f64],
) -> Result<Vec<SigmaFit>, CoefficientError> {
    validate_levels(n_list, p_list)?;
    let mut levels = n_list.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    if levels.len() < 2 {
        return Err(CoefficientError::Config("log-Lipschitz fit needs two distinct levels N".into()));
    }
    let ev = Evaluator::new(model, MARK_NODES);
    let data: Vec<Vec<PairData>> = levels
        .iter()
        .map(|&n| pair_data(&ev, n, sampler, p_list))
        .collect::<Result<_, _>>()
        .map_err(|w| CoefficientError::CertificateRefuted { witnesses: vec![w] })?;
    let mut fits = Vec::with_capacity(SIGMA_GRID.len());
    for &sigma in &SIGMA_GRID {
        let mut c_f = Vec::new();
        let mut c_g = Vec::new();
        let mut c_h = vec![Vec::new(); p_list.len()];
        let mut worst: Option<PairWitness> = None;
        for (&n, pairs) in levels.iter().zip(&data) {
            let ln = n.ln();
            let eps = n.powf(-sigma);
            let mut best = [0.0f64; 2];
            let mut best_h = vec![0.0f64; p_list.len()];
            for pd in pairs {
                let rf = pd.df / (ln * (pd.d + eps));
                let rg = pd.dg2 / (ln * (pd.d * pd.d + eps * eps));
                let mut cands = vec![(rf, "drift"), (rg, "diffusion")];
                best[0] = best[0].max(rf);
                best[1] = best[1].max(rg);
                for (k, &p) in p_list.iter().enumerate() {
                    let rh = pd.dh[k] / (ln * (pd.d.powf(2.0 * p) + eps.powf(2.0 * p)));
                    best_h[k] = best_h[k].max(rh);
                    cands.push((rh, "jump"));
                }
                // Witness tracking only at the top level, where growth is judged.
                if n == levels[levels.len() - 1] {
                    for (r, name) in cands {
                        if worst.as_ref().is_none_or(|w| r > w.ratio) {
                            worst = Some(PairWitness {
                                n,
                                class: pd.class,
                                x: pd.x.clone(),
                                y: pd.y.clone(),
                                component: name.into(),
                                ratio: r,
                            });
                        }
                    }
                }
            }
            c_f.push(best[0]);
            c_g.push(best[1]);
            for (k, v) in best_h.into_iter().enumerate() {
                c_h[k].push(v);
            }
        }
        let k = levels.len();
        let dl = levels[k - 1].ln() - levels[k - 2].ln();
        let slope = |v: &[f64]| ((v[k - 1] + 1e-12).ln() - (v[k - 2] + 1e-12).ln()) / dl;
        let mut growth = vec![slope(&c_f), slope(&c_g)];
        growth.extend(c_h.iter().map(|v| slope(v)));
        let accepted = growth.iter().all(|g| *g <= GROWTH_SLOPE_LIMIT);
        fits.push(SigmaFit { sigma, n_list: levels.clone(), c_f, c_g, c_h, growth, accepted, worst });
    }
    Ok(fits)
}

/// Largest `sigma` whose constants stay bounded in `N`, with `C` and `C(p)`.
pub fn check_log_lipschitz(
    model: &CoefficientModel,
    n_list: &[f64],
    sampler: &PairSampler,
    p_list: &[f64],
) -> Result<LogLipschitzReport, CoefficientError> {
    let fits = fit_log_lipschitz(model, n_list, sampler, p_list)?;
    let chosen = fits.iter().find(|f| f.accepted).ok_or_else(|| CoefficientError::CertificateRefuted {
        witnesses: fits.iter().filter_map(|f| f.worst.clone()).collect(),
    })?;
    let max_of = |v: &[f64]| v.iter().fold(1.0f64, |a, b| a.max(*b));
    let certificate = LogLipschitzCertificate {
        c: max_of(&chosen.c_f).max(max_of(&chosen.c_g)),
        sigma: chosen.sigma,
        k: std::f64::consts::E,
        p_list: p_list.to_vec(),
        c_of_p: p_list.iter().zip(&chosen.c_h).map(|(p, v)| (*p, max_of(v))).collect(),
    };
    let pairs_per_level = sampler.pairs(n_list[0], model.dim()).len();
    Ok(LogLipschitzReport {
        model: model.name().to_string(),
        dim: model.dim(),
        domain: sampler.domain,
        pairs_per_level,
        certificate,
        fits,
    })
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

/// Shape of the modulus family `r_M(u) = L_M * shape(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusShape {
    /// `u`
    Linear,
    /// `sqrt(u)`
    Sqrt,
    /// `u sqrt(log(1/u))` near 0, continued linearly past `e^{-1/2}`.
    ULogU,
}

impl ModulusShape {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            ModulusShape::Linear => u,
            ModulusShape::Sqrt => u.sqrt(),
            ModulusShape::ULogU => {
                if u <= 0.0 {
                    0.0
                } else {
                    u * (-u.ln()).max(0.5).sqrt()
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonCertificate {
    pub modulus: ModulusShape,
    pub monotone_h: bool,
    pub drift_c: f64,
    pub drift_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub model: String,
    pub m_list: Vec<f64>,
    /// Fitted `L_M` so that `r_M = L_M * shape` dominates the g and h terms.
    pub modulus_scale: Vec<f64>,
    pub modulus_nondecreasing: bool,
    pub h_monotone_observed: bool,
    pub monotone_witness: Option<PairWitness>,
    /// Largest `|f(x)-f(y)| / (C log M |x-y| + C log M / M^sigma)`.
    pub drift_ratio_max: f64,
    pub verdict: Verdict,
}

/// Check the one-dimensional comparison hypotheses over `|x|, |y| <= M`.
pub fn check_comparison_assumption(
    model: &CoefficientModel,
    cert: &ComparisonCertificate,
    m_list: &[f64],
    sampler: &PairSampler,
) -> Result<ComparisonReport, CoefficientError> {
    if model.dim() != 1 {
        return Err(CoefficientError::Dimension { expected: 1, got: model.dim() });
    }
    validate_levels(m_list, &[])?;
    let ev = Evaluator::new(model, MARK_NODES);
    let weights: Vec<f64> = ev.weights().collect();
    let grid: Vec<f64> = (1..=200).map(|i| i as f64 / 200.0).collect();
    let modulus_nondecreasing = grid.windows(2).all(|w| cert.modulus.eval(w[1]) >= cert.modulus.eval(w[0]));
    let mut modulus_scale = Vec::new();
    let mut drift_ratio_max = 0.0f64;
    let mut monotone_witness = None;
    for &m in m_list {
        let data = pair_data(&ev, m, sampler, &[1.0])
            .map_err(|w| CoefficientError::CertificateRefuted { witnesses: vec![w] })?;
        let mut scale2 = 0.0f64;
        for pd in &data {
            if pd.d == 0.0 {
                continue;
            }
            let s = cert.modulus.eval(pd.d);
            scale2 = scale2.max(pd.dg2 / (s * s)).max(pd.dh[0] / (s * s));
            let rhs = cert.drift_c * m.ln() * (pd.d + m.powf(-cert.drift_sigma));
            drift_ratio_max = drift_ratio_max.max(pd.df / rhs);
            // Monotonicity of h in x at every mark node.
            let (lo, hi) = if pd.x[0] <= pd.y[0] { (&pd.x, &pd.y) } else { (&pd.y, &pd.x) };
            if monotone_witness.is_none() && !weights.is_empty() {
                let vl = ev.eval(lo);
                let vh = ev.eval(hi);
                for q in 0..weights.len() {
                    let tol = 1e-12 * (1.0 + vl.h[q].abs().max(vh.h[q].abs()));
                    if vl.h[q] > vh.h[q] + tol {
                        monotone_witness = Some(PairWitness {
                            n: m,
                            class: pd.class,
                            x: lo.clone(),
                            y: hi.clone(),
                            component: "jump".into(),
                            ratio: vl.h[q] - vh.h[q],
                        });
                        break;
                    }
                }
            }
        }
        modulus_scale.push(scale2.sqrt());
    }
    let h_monotone_observed = monotone_witness.is_none();
    let ok = modulus_nondecreasing
        && cert.monotone_h
        && h_monotone_observed
        && drift_ratio_max <= 1.0 + 1e-9
        && modulus_scale.iter().all(|s| s.is_finite());
    Ok(ComparisonReport {
        model: model.name().to_string(),
        m_list: m_list.to_vec(),
        modulus_scale,
        modulus_nondecreasing,
        h_monotone_observed,
        monotone_witness,
        drift_ratio_max,
        verdict: Verdict::from_bool(ok),
    })
}

// ---------------------------------------------------------------------------
// Jump homeomorphism
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomeoSampleSpec {
    pub points: usize,
    pub radius: f64,
    /// Round-trip tolerance relative to `1 + |x|`.
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for HomeoSampleSpec {
    fn default() -> Self {
        HomeoSampleSpec { points: 400, radius: 10.0, tol: 1e-9, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeoReport {
    pub model: String,
    pub has_certificate: bool,
    pub k_inv: Option<f64>,
    pub max_roundtrip_error: f64,
    /// `sup |Lambda(y1)-Lambda(y2)| / |y1-y2|`.
    pub max_lipschitz_ratio: f64,
    /// `sup |Lambda(y)| / (1 + |y|)`.
    pub max_growth_ratio: f64,
    /// Two distinct points and a mark with `Gamma_u(x1) = Gamma_u(x2)`.
    pub injectivity_witness: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
    pub verdict: Verdict,
}

fn homeo_marks(model: &CoefficientModel, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let marks = model.marks();
    let mut us: Vec<Vec<f64>> = marks.quadrature(16).into_iter().map(|(_, u)| u).collect();
    let mut u = vec![0.0; marks.dim()];
    for _ in 0..16 {
        marks.sample(rng, &mut u);
        us.push(u.clone());
    }
    if let (Some(b), 1) = (marks.bound(), marks.dim()) {
        if matches!(marks.law(), super::MarkLaw::UniformBall { .. }) {
            us.push(vec![b]);
            us.push(vec![-b]);
        }
    }
    us
}

/// Verify a declared inverse of `Gamma_u(x) = x + h(x, u)`, or without one,
/// probe `Gamma_u` for non-injectivity.
///
/// A probe that finds two distinct points with the same image yields FAIL;
/// a probe that finds none is INCONCLUSIVE.
pub fn check_jump_homeomorphism(
    model: &CoefficientModel,
    cert: Option<&JumpHomeoCertificate>,
    spec: &HomeoSampleSpec,
) -> Result<HomeoReport, CoefficientError> {
    let dim = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let marks = homeo_marks(model, &mut rng);
    let c = model.coefficients();
    let mut xs: Vec<Vec<f64>> = vec![vec![0.0; dim]];
    for _ in 0..spec.points {
        let r = spec.radius * rng.random::<f64>();
        let d = random_unit(&mut rng, dim);
        xs.push(d.into_iter().map(|v| v * r).collect());
    }
    let gamma = |x: &[f64], u: &[f64]| {
        let mut h = vec![0.0; dim];
        c.jump(x, u, &mut h);
        x.iter().zip(&h).map(|(a, b)| a + b).collect::<Vec<f64>>()
    };
    let Some(cert) = cert else {
        let mut witness = None;
        'outer: for u in &marks {
            let mut imgs: Vec<(Vec<f64>, &Vec<f64>)> = xs.iter().map(|x| (gamma(x, u), x)).collect();
            imgs.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));
            for w in imgs.windows(2) {
                let (ga, xa) = &w[0];
                let (gb, xb) = &w[1];
                let gap = sq_dist(ga, gb).sqrt();
                let sep = sq_dist(xa, xb).sqrt();
                if gap <= 1e-12 * (1.0 + norm(ga)) && sep > spec.tol * (1.0 + norm(xa)) {
                    witness = Some(((*xa).clone(), (*xb).clone(), u.clone()));
                    break 'outer;
                }
            }
        }
        let verdict = if witness.is_some() { Verdict::Fail } else { Verdict::Inconclusive };
        return Ok(HomeoReport {
            model: model.name().to_string(),
            has_certificate: false,
            k_inv: None,
            max_roundtrip_error: f64::NAN,
            max_lipschitz_ratio: f64::NAN,
            max_growth_ratio: f64::NAN,
            injectivity_witness: witness,
            verdict,
        });
    };
    let mut max_rt = 0.0f64;
    let mut max_lip = 0.0f64;
    let mut max_growth = 0.0f64;
    let mut back = vec![0.0; dim];
    let mut back2 = vec![0.0; dim];
    for u in &marks {
        for x in &xs {
            let y = gamma(x, u);
            cert.invert(&y, u, &mut back);
            let err = sq_dist(&back, x).sqrt() / (1.0 + norm(x));
            if !(err <= spec.tol) {
                return Err(CoefficientError::InverseMismatch { x: x.clone(), u: u.clone(), error: err });
            }
            max_rt = max_rt.max(err);
        }
        for pair in xs.chunks(2) {
            if pair.len() < 2 {
                continue;
            }
            cert.invert(&pair[0], u, &mut back);
            cert.invert(&pair[1], u, &mut back2);
            let dy = sq_dist(&pair[0], &pair[1]).sqrt();
            if dy > 0.0 {
                max_lip = max_lip.max(sq_dist(&back, &back2).sqrt() / dy);
            }
            max_growth = max_growth.max(norm(&back) / (1.0 + norm(&pair[0])));
        }
    }
    let bound = cert.k_inv * (1.0 + 1e-9);
    let ok = max_lip <= bound && max_growth <= bound;
    Ok(HomeoReport {
        model: model.name().to_string(),
        has_certificate: true,
        k_inv: Some(cert.k_inv),
        max_roundtrip_error: max_rt,
        max_lipschitz_ratio: max_lip,
        max_growth_ratio: max_growth,
        injectivity_witness: None,
        verdict: Verdict::from_bool(ok),
    })
}

// ---------------------------------------------------------------------------
// Compensator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensatorReport {
    pub model: String,
    pub q_list: Vec<usize>,
    /// Root-mean-square over replicates of the worst error across points.
    pub errors: Vec<f64>,
    pub slope: f64,
    pub verdict: Verdict,
}

/// Compare `c(x)` with Monte Carlo sums `(lambda/Q) sum_q h(x, u_q)` of
/// growing size and fit the decay of the error on a log-log scale.
///
/// PASS when the slope is below `-0.25` or every error is at rounding level.
pub fn compensator_consistency(
    model: &CoefficientModel,
    points: &[Vec<f64>],
    q_list: &[usize],
    seed: u64,
) -> Result<CompensatorReport, CoefficientError> {
    if q_list.len() < 2 || points.is_empty() {
        return Err(CoefficientError::Config("need at least two sample sizes and one point".into()));
    }
    let dim = model.dim();
    let c = model.coefficients();
    let lam = model.marks().total_mass();
    const REPLICATES: u64 = 16;
    let mut errors = Vec::new();
    let mut scale = 0.0f64;
    for &q in q_list {
        let mut ms = 0.0;
        for rep in 0..REPLICATES {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (q as u64).rotate_left(32) ^ rep);
            let mut u = vec![0.0; model.marks().dim()];
            let us: Vec<Vec<f64>> = (0..q)
                .map(|_| {
                    model.marks().sample(&mut rng, &mut u);
                    u.clone()
                })
                .collect();
            let mut worst = 0.0f64;
            for x in points {
                if x.len() != dim {
                    return Err(CoefficientError::Dimension { expected: dim, got: x.len() });
                }
                let mut cx = vec![0.0; dim];
                c.compensator(x, &mut cx);
                let mut acc = vec![0.0; dim];
                let mut h = vec![0.0; dim];
                for u in &us {
                    c.jump(x, u, &mut h);
                    for (a, b) in acc.iter_mut().zip(&h) {
                        *a += b;
                    }
                }
                let est: Vec<f64> = acc.iter().map(|a| lam * a / q as f64).collect();
                scale = scale.max(norm(&cx)).max(norm(&est));
                worst = worst.max(sq_dist(&cx, &est).sqrt());
            }
            ms += worst * worst;
        }
        errors.push((ms / REPLICATES as f64).sqrt());
    }
    let exact = errors.iter().all(|e| *e <= 1e-12 * (1.0 + scale));
    let lx: Vec<f64> = q_list.iter().map(|q| (*q as f64).ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.max(1e-300).ln()).collect();
    let slope = if exact { f64::NEG_INFINITY } else { LinearFit::ols(&lx, &ly).map_or(0.0, |f| f.slope) };
    Ok(CompensatorReport {
        model: model.name().to_string(),
        q_list: q_list.to_vec(),
        errors,
        slope,
        verdict: Verdict::from_bool(exact || slope < -0.25),
    })
}
