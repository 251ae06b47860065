//! Closed-form oracles, computed here independently of the library code.

use jumpsde::coefficients::{
    cutoff_derivative, cutoff_weight, BuiltinParams, CoefficientModel, GrowthGauge, JumpForm, MarkLaw, ModelSpec,
    StateVector,
};
use jumpsde::integrator::{simulate, ExplosionKind, SchemeConfig};
use jumpsde::lyapunov::{build_lyapunov, build_yamada_sequence, Modulus, Sign};
use jumpsde::noise::{sample_noise, ScenarioSeed};
use jumpsde::stats::Estimate;

fn build(name: &str) -> CoefficientModel {
    ModelSpec::builtin(name).build().unwrap()
}

fn pure_drift_log() -> CoefficientModel {
    ModelSpec::builtin("log_model")
        .with_params(BuiltinParams { jump: Some(JumpForm::None), diffusion_scale: Some(0.0), ..Default::default() })
        .build()
        .unwrap()
}

/// Composite Simpson with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

fn within(e: &Estimate, target: f64, z: f64) -> bool {
    (e.mean - target).abs() <= z * e.std_error
}

#[test]
fn yamada_levels_for_linear_modulus() {
    let seq = build_yamada_sequence(Modulus::linear(), 12, 1e-12).unwrap();
    for n in 0..=12 {
        let nf = n as f64;
        let expect = 1.0 / (1.0 + nf * (nf + 1.0) / 2.0);
        let got = seq.levels()[n];
        assert!((got - expect).abs() <= 1e-10 * expect, "a_{n} = {got}, expected {expect}");
    }
}

#[test]
fn yamada_levels_for_sqrt_modulus() {
    let seq = build_yamada_sequence(Modulus::sqrt(), 8, 1e-12).unwrap();
    for n in 0..=8 {
        let nf = n as f64;
        let expect = (-nf * (nf + 1.0) / 2.0).exp();
        let got = seq.levels()[n];
        assert!((got - expect).abs() <= 1e-10 * expect, "a_{n} = {got}, expected {expect}");
    }
}

#[test]
fn yamada_level_masses_equal_n() {
    for r in [Modulus::linear(), Modulus::sqrt()] {
        let seq = build_yamada_sequence(r, 6, 1e-12).unwrap();
        for n in 1..=6 {
            let m = seq.level_mass(n).unwrap();
            assert!((m - n as f64).abs() < 1e-8, "{}: mass {m} on level {n}", seq.modulus().name());
        }
    }
}

#[test]
fn smoother_integrates_to_the_positive_part_offset() {
    // psi_n(x) = int_0^x int_0^y phi_n, so x - psi_n(x) above the interval is
    // a_{n-1} - int (a_{n-1} - u) phi_n(u) du.
    let seq = build_yamada_sequence(Modulus::linear(), 5, 1e-12).unwrap();
    for n in 1..=5 {
        let s = seq.smoother(n);
        let (lo, hi) = s.interval();
        let ln = |v: f64| s.second(v.exp()) * v.exp();
        let mass = simpson(ln, lo.ln(), hi.ln(), 20_000);
        assert!((mass - 1.0).abs() < 1e-6, "int phi_{n} = {mass}");
        let offset = hi - simpson(|v| (hi - v.exp()) * ln(v), lo.ln(), hi.ln(), 20_000);
        assert!((offset - s.offset()).abs() < 1e-6 * hi, "offset {offset} vs {}", s.offset());
    }
}

#[test]
fn psi_for_constant_gauge_is_a_logarithm() {
    for c in [0.5, 1.0, 3.0] {
        let p = build_lyapunov(GrowthGauge::constant(c), Sign::Plus, 1e-11).unwrap();
        for xi in [0.0, 0.1, 1.0, 7.5, 100.0, 1e6] {
            let expect = (1.0 + c * xi).ln() / c;
            assert!((p.psi(xi).unwrap() - expect).abs() < 1e-9, "c = {c}, xi = {xi}");
        }
        // exp(C t) (1 + c R^2)^{1/c} / (1 + c x^2)^{1/c}.
        let bound = p.escape_bound(0.2, 1.0, 1.0, 10.0).unwrap();
        let expect = (0.2f64).exp() * ((1.0 + c) / (1.0 + 100.0 * c)).powf(1.0 / c);
        assert!((bound - expect.min(1.0)).abs() < 1e-9 * expect.max(1e-300));
    }
}

#[test]
fn psi_for_log_gauge_matches_direct_quadrature() {
    let p = build_lyapunov(GrowthGauge::log_e_plus(), Sign::Plus, 1e-10).unwrap();
    let integrand = |s: f64| 1.0 / (s * (std::f64::consts::E + s).ln() + 1.0);
    for xi in [0.5, 2.0, 30.0, 1000.0] {
        let direct = simpson(integrand, 0.0, xi, 200_000);
        assert!((p.psi(xi).unwrap() - direct).abs() < 1e-8, "xi = {xi}");
        let minus = build_lyapunov(GrowthGauge::log_e_plus(), Sign::Minus, 1e-10).unwrap();
        assert!((minus.phi(xi).unwrap() - (-direct).exp()).abs() < 1e-8);
    }
}

#[test]
fn cutoff_derivative_matches_finite_differences() {
    let r = 4.0;
    for k in 1..40 {
        let s = r + 1.0 + 2.0 * k as f64 / 40.0;
        let h = 1e-6;
        let fd = (cutoff_weight(&[s + h], r) - cutoff_weight(&[s - h], r)) / (2.0 * h);
        assert!((fd - cutoff_derivative(s, r)).abs() < 1e-7, "s = {s}");
    }
}

#[test]
fn pure_drift_endpoint_is_x_to_the_e_to_the_t() {
    let model = pure_drift_log();
    for x0 in [0.5, 1.5, 2.0] {
        let noise = sample_noise(ScenarioSeed::new(0, 0), 1.0, 1e-5, 1, model.marks()).unwrap();
        let traj = simulate(&model, &StateVector::scalar(x0).unwrap(), &noise, &SchemeConfig::tamed(1e-5)).unwrap();
        let exact = f64::powf(x0, 1f64.exp());
        let rel = (traj.last()[0] - exact).abs() / exact;
        assert!(rel <= 1e-3, "x0 = {x0}: relative error {rel}");
    }
}

#[test]
fn flip_solution_is_x_until_the_first_jump() {
    let model = build("pure_jump_flip");
    for path in 0..1000 {
        let noise = sample_noise(ScenarioSeed::new(11, path), 1.0, 1e-2, 1, model.marks()).unwrap();
        let x0 = 1.0 + path as f64 / 1000.0;
        let traj = simulate(&model, &StateVector::scalar(x0).unwrap(), &noise, &SchemeConfig::tamed(1e-2)).unwrap();
        let tau = noise.jumps().first().map_or(f64::INFINITY, |j| j.time);
        for (i, t) in traj.times().iter().enumerate() {
            let exact = if *t < tau { x0 } else { 0.0 };
            assert_eq!(traj.state(i)[0], exact, "path {path}, t = {t}");
        }
    }
}

#[test]
fn double_flip_solution_alternates_sign() {
    let model = build("pure_jump_double_flip");
    for path in 0..1000 {
        let noise = sample_noise(ScenarioSeed::new(12, path), 1.0, 1e-2, 1, model.marks()).unwrap();
        let traj = simulate(&model, &StateVector::scalar(1.0).unwrap(), &noise, &SchemeConfig::tamed(1e-2)).unwrap();
        for (i, t) in traj.times().iter().enumerate() {
            let exact = if noise.jump_count_by(*t).is_multiple_of(2) { 1.0 } else { -1.0 };
            assert_eq!(traj.state(i)[0], exact, "path {path}, t = {t}");
        }
    }
}

#[test]
fn quadratic_drift_explodes_near_one_over_x0() {
    let model = build("quadratic_drift");
    for x0 in [1.0, 2.0] {
        let noise = sample_noise(ScenarioSeed::new(0, 0), 1.5, 1e-4, 1, model.marks()).unwrap();
        let traj = simulate(&model, &StateVector::scalar(x0).unwrap(), &noise, &SchemeConfig::euler(1e-4)).unwrap();
        let e = traj.explosion().expect("no explosion flagged");
        assert_eq!(e.kind, ExplosionKind::Threshold);
        let t = 1.0 / x0;
        assert!(e.time >= 0.9 * t && e.time <= 1.05 * t, "x0 = {x0}: explosion at {}", e.time);
    }
}

#[test]
fn poisson_clock_statistics() {
    let lambda = 1.0;
    let horizon = 1.0;
    let marks = jumpsde::coefficients::MarkSpace::new(MarkLaw::Uniform { low: -0.5, high: 0.5 }, lambda).unwrap();
    let n = 100_000;
    let mut counts = Vec::with_capacity(n);
    let mut any = 0;
    let mut w_sq = Vec::with_capacity(n);
    let mut marks_seen = Vec::new();
    for path in 0..n as u64 {
        let noise = sample_noise(ScenarioSeed::new(5, path), horizon, 1.0, 1, &marks).unwrap();
        counts.push(noise.jumps().len() as f64);
        any += usize::from(!noise.jumps().is_empty());
        let wt = noise.w(noise.times().len() - 1)[0];
        w_sq.push(wt * wt);
        marks_seen.extend(noise.jumps().iter().map(|j| j.mark[0]));
    }
    let count = Estimate::from_samples(&counts);
    assert!(within(&count, lambda * horizon, 4.0), "jump count mean {count:?}");
    let hit = Estimate::proportion(any, n);
    assert!(within(&hit, 1.0 - (-lambda * horizon).exp(), 4.0), "P(N_T > 0) = {hit:?}");
    let var = Estimate::from_samples(&w_sq);
    assert!(within(&var, horizon, 4.0), "E[W_T^2] = {var:?}");
    let m = Estimate::from_samples(&marks_seen);
    assert!(within(&m, 0.0, 4.0), "mark mean {m:?}");
}
