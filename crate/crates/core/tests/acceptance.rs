//! Acceptance criteria 1-9. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Run alone with `cargo test -p jumpsde --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use jumpsde::cli::Manifest;
use jumpsde::coefficients::{BuiltinParams, CoefficientModel, GrowthGauge, JumpForm, ModelSpec, StateVector};
use jumpsde::integrator::{simulate, ExplosionKind, SchemeConfig};
use jumpsde::lyapunov::{build_lyapunov, build_yamada_sequence, Modulus, Sign};
use jumpsde::noise::{sample_noise, ScenarioSeed};
use jumpsde::propertylab::{run_experiment, suite_configs, ExperimentReport, Scale};

type Outcome = Result<String, String>;

/// Name, check and runtime budget in seconds.
type Criterion = (&'static str, fn() -> Outcome, u64);

fn fixture(name: &str) -> ExperimentReport {
    let cfg = ["paper_counterexamples", "paper_theorems"]
        .iter()
        .flat_map(|s| suite_configs(s, Scale::Full, 0).unwrap())
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("no fixture {name}"));
    run_experiment(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn stat(rep: &ExperimentReport, name: &str) -> (f64, f64, usize) {
    let s = rep.statistic(name).unwrap_or_else(|| panic!("{}: no statistic {name}", rep.name));
    (s.value, s.std_error, s.n)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn build(name: &str) -> CoefficientModel {
    ModelSpec::builtin(name).build().unwrap()
}

fn exact_pure_jumps() -> Outcome {
    let (flip, double) = (build("pure_jump_flip"), build("pure_jump_double_flip"));
    let mut worst = 0.0f64;
    for path in 0..1000u64 {
        let seed = ScenarioSeed::new(0, path);
        let noise = sample_noise(seed, 1.0, 1e-2, 1, flip.marks()).unwrap();
        let tau = noise.jumps().first().map_or(f64::INFINITY, |j| j.time);
        let x = 1.0 + path as f64 / 1000.0;
        let tr = simulate(&flip, &StateVector::scalar(x).unwrap(), &noise, &SchemeConfig::tamed(1e-2)).unwrap();
        for (i, t) in tr.times().iter().enumerate() {
            worst = worst.max((tr.state(i)[0] - if *t < tau { x } else { 0.0 }).abs());
        }
        let tr = simulate(&double, &StateVector::scalar(1.0).unwrap(), &noise, &SchemeConfig::tamed(1e-2)).unwrap();
        for (i, t) in tr.times().iter().enumerate() {
            let exact = if noise.jump_count_by(*t).is_multiple_of(2) { 1.0 } else { -1.0 };
            worst = worst.max((tr.state(i)[0] - exact).abs());
        }
    }
    check(worst <= f64::EPSILON, format!("max |X - exact| = {worst:e} over 1000 scenarios"))
}

fn explosion() -> Outcome {
    let q = build("quadratic_drift");
    let noise = sample_noise(ScenarioSeed::new(0, 0), 1.5, 1e-4, 1, q.marks()).unwrap();
    let tr = simulate(&q, &StateVector::scalar(1.0).unwrap(), &noise, &SchemeConfig::euler(1e-4)).unwrap();
    let blowup = tr.explosion().filter(|e| e.kind == ExplosionKind::Threshold).map(|e| e.time);
    let in_window = blowup.is_some_and(|t| (0.9..=1.05).contains(&t));
    let rep = fixture("log_nonexplosion");
    let (freq, _, n) = stat(&rep, "explosion_frequency");
    check(
        in_window && freq == 0.0 && n == 10_000 && rep.provenance.paths == 10_000,
        format!("quadratic blow-up at {blowup:?}; log model {freq} explosions over {n} paths to T = 2"),
    )
}

fn ode_oracle() -> Outcome {
    let model = ModelSpec::builtin("log_model")
        .with_params(BuiltinParams { jump: Some(JumpForm::None), diffusion_scale: Some(0.0), ..Default::default() })
        .build()
        .unwrap();
    let x0 = 1.5f64;
    let noise = sample_noise(ScenarioSeed::new(0, 0), 1.0, 1e-5, 1, model.marks()).unwrap();
    let tr = simulate(&model, &StateVector::scalar(x0).unwrap(), &noise, &SchemeConfig::tamed(1e-5)).unwrap();
    let exact = x0.powf(1f64.exp());
    let rel = (tr.last()[0] - exact).abs() / exact;
    check(rel <= 1e-3, format!("X_1 = {:.8}, x^e = {exact:.8}, relative error {rel:.2e}", tr.last()[0]))
}

fn lyapunov_gadgets() -> Outcome {
    let pair = build_lyapunov(GrowthGauge::log_e_plus(), Sign::Plus, 1e-10).map_err(|e| e.to_string())?;
    let psi0 = pair.psi(0.0).unwrap();
    let grid: Vec<f64> = (0..1000).map(|k| 0.1 * k as f64).collect();
    let second = pair.max_second_difference(&grid).unwrap();
    let mut level_err = 0.0f64;
    let mut sup = 0.0f64;
    for (r, sqrt) in [(Modulus::linear(), false), (Modulus::sqrt(), true)] {
        let n_max = if sqrt { 8 } else { 20 };
        let seq = build_yamada_sequence(r, n_max, 1e-12).map_err(|e| e.to_string())?;
        for n in 0..=n_max {
            let nf = n as f64;
            let exact = if sqrt { (-nf * (nf + 1.0) / 2.0).exp() } else { 1.0 / (1.0 + nf * (nf + 1.0) / 2.0) };
            level_err = level_err.max((seq.levels()[n] - exact).abs() / exact);
        }
        for n in 1..=n_max {
            let s = seq.smoother(n);
            let (lo, hi) = s.interval();
            for k in 0..=2000 {
                let x = lo * (hi / lo).powf(k as f64 / 2000.0);
                let rx = seq.modulus().eval(x);
                sup = sup.max(rx * rx * s.second(x) * n as f64);
            }
        }
    }
    check(
        psi0 == 0.0 && second <= 0.0 && level_err <= 1e-10 && sup <= 2.0 + 1e-8,
        format!(
            "Psi(0) = {psi0}, max second difference {second:.2e}, level error {level_err:.1e}, \
             sup n r^2 phi_n = {sup:.6}"
        ),
    )
}

fn comparison() -> Outcome {
    let good = fixture("log_comparison");
    let (v, _, n) = stat(&good, "violation_path_fraction");
    let bad = fixture("double_flip_comparison");
    let (p, se, m) = stat(&bad, "violation_path_fraction");
    let target = 1.0 - (-1f64).exp();
    check(
        v == 0.0 && n == 10_000 && m == 10_000 && (p - target).abs() <= 3.0 * se,
        format!("log pair {v} over {n} paths; double flip {p:.4} +- {se:.4} vs {target:.4}"),
    )
}

fn noncontact() -> Outcome {
    let flip = fixture("flip_noncontact");
    let (p, se, _) = stat(&flip, "contact_fraction");
    let log = fixture("log_noncontact");
    let (c, _, n) = stat(&log, "contact_fraction");
    let target = 1.0 - (-1f64).exp();
    check(
        (p - target).abs() <= 3.0 * se && c == 0.0 && n == 10_000,
        format!("flip {p:.4} +- {se:.4} vs {target:.4}; linear-jump log model {c} over {n} paths"),
    )
}

fn strong_order() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, target) in [("log_uniqueness_drift", 2.0), ("log_uniqueness_diffusion", 1.0)] {
        let rep = fixture(name);
        let fit = rep.fit("squared_error_order").unwrap();
        ok &= (fit.value - target).abs() <= 0.3 && rep.provenance.paths == 1000;
        parts.push(format!("{name} slope {:.3} +- {:.3} (target {target})", fit.value, fit.std_error));
    }
    check(ok, parts.join("; "))
}

fn flow_exponent() -> Outcome {
    let rep = fixture("log_flow_continuity");
    let fit = rep.fit("moment_slope").unwrap();
    let (_, _, n) = stat(&rep, "contact_fraction");
    check(
        fit.value >= 1.5 - 0.2 && n == 10_000,
        format!("slope {:.3} +- {:.3} over {} separations, {n} paths", fit.value, fit.std_error, fit.points),
    )
}

fn run_cli(args: &[&str], out: &Path) -> Result<Manifest, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_jumpsde"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("JUMPSDE_SEED")
        .env_remove("JUMPSDE_WORKERS")
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.code() != Some(0) {
        return Err(format!("{args:?} exited with {:?}", status.status.code()));
    }
    serde_json::from_slice(&fs::read(out.join("manifest.json")).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn reproducibility() -> Outcome {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (suite, scale) in [("paper_counterexamples", "full"), ("paper_theorems", "smoke")] {
        let first = tmp.path().join(format!("{suite}-1"));
        let m1 = run_cli(&["suite", "--name", suite, "--scale", scale, "--workers", "1"], &first)?;
        let manifest = first.join("manifest.json");
        for workers in ["3", "8"] {
            let again = tmp.path().join(format!("{suite}-{workers}"));
            let m2 = run_cli(&["suite", "--config", manifest.to_str().unwrap(), "--workers", workers], &again)?;
            if m1.outputs != m2.outputs || m1.config_hash != m2.config_hash {
                return Err(format!("{suite}: outputs differ with --workers {workers}"));
            }
            for o in &m1.outputs {
                if fs::read(first.join(&o.path)).ok() != fs::read(again.join(&o.path)).ok() {
                    return Err(format!("{suite}: {} differs with --workers {workers}", o.path));
                }
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} report files byte-identical across --workers 1, 3, 8 and manifest reruns"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 exact pure-jump fixtures", exact_pure_jumps, 10),
        ("2 explosion and non-explosion", explosion, 120),
        ("3 pure-drift ODE oracle", ode_oracle, 60),
        ("4 Lyapunov and Yamada gadgets", lyapunov_gadgets, 5),
        ("5 comparison", comparison, 120),
        ("6 non-contact", noncontact, 120),
        ("7 strong-order regression", strong_order, 300),
        ("8 flow-continuity exponent", flow_exponent, 600),
        ("9 reproducibility", reproducibility, 600),
    ];
    let mut failed = 0;
    for (name, f, limit) in criteria {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let slow = took > Duration::from_secs(limit);
        let (ok, detail) = match outcome {
            Ok(d) if !slow => (true, d),
            Ok(d) => (false, format!("{d}; over the {limit} s budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!ok);
        println!(
            "{} criterion {name:<32} {:>7.2}s/{limit}s  {detail}",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} of 9 acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 9 acceptance criteria passed");
}
