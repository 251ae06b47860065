use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    contact_floor, par_paths, Context, ExperimentConfig, ExperimentKind, ExperimentReport, FittedExponent, LabError,
    Mode, Statistic, Table,
};
use crate::coefficients::{
    check_growth_assumption, check_jump_homeomorphism, CoefficientModel, GrowthGauge, GrowthSampleSpec,
    HomeoSampleSpec, StateVector,
};
use crate::integrator::{simulate, Trajectory};
use crate::lyapunov::{build_lyapunov, LyapunovPair, Sign};
use crate::noise::cell_count;
use crate::report::Verdict;
use crate::stats::{Estimate, LinearFit};

fn wrong_kind(cfg: &ExperimentConfig, want: &str) -> LabError {
    LabError::Config(format!("experiment `{}` is not a {want} experiment", cfg.name))
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Every reported state of a trajectory, pre-jump values included.
fn each_state(tr: &Trajectory, mut f: impl FnMut(&[f64])) {
    for i in 0..tr.len() {
        if let Some(pre) = tr.pre_jump(i) {
            f(pre);
        }
        f(tr.state(i));
    }
}

/// Fit `y = a + b x` on the pairs where both coordinates are finite.
fn fit_finite(xs: &[f64], ys: &[f64]) -> (Option<LinearFit>, usize) {
    let (fx, fy): (Vec<f64>, Vec<f64>) =
        xs.iter().zip(ys).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(x, y)| (*x, *y)).unzip();
    (LinearFit::ols(&fx, &fy), fx.len())
}

// ---------------------------------------------------------------------------

pub fn nonexplosion_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, LabError> {
    let ctx = Context::new(cfg)?;
    let ExperimentKind::Nonexplosion { gauge, checkpoints } = &cfg.experiment else {
        return Err(wrong_kind(cfg, "nonexplosion"));
    };
    let gauge = GrowthGauge::new(*gauge);
    let growth = check_growth_assumption(&ctx.model, &gauge, &GrowthSampleSpec::for_gauge(&gauge))?;
    let lyap = build_lyapunov(gauge, Sign::Plus, 1e-10)?;
    let scheme = ctx.scheme();
    let cells = cell_count(cfg.horizon, cfg.dt);
    let m = *checkpoints;
    let ks: Vec<u64> = (0..m).map(|j| (cells as f64 * j as f64 / (m - 1) as f64).round() as u64).collect();

    let per_path = par_paths(cfg.paths, |path| {
        let noise = ctx.noise(path, cfg.dt)?;
        let tr = simulate(&ctx.model, &ctx.x0, &noise, &scheme)?;
        // Checkpoints at or after an explosion carry no value.
        let alive = |i: usize| i < tr.len() && tr.explosion().is_none_or(|e| tr.times()[i] < e.time);
        let phis = ks
            .iter()
            .map(|&k| {
                let i = noise.grid_index(k, cells).expect("checkpoint on grid");
                if !alive(i) {
                    return Ok(f64::NAN);
                }
                let x = tr.state(i);
                lyap.phi(x.iter().map(|v| v * v).sum())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok((tr.explosion().map(|e| e.time), phis))
    })?;

    let times: Vec<f64> = per_path.iter().filter_map(|(t, _)| *t).collect();
    let exploded = times.len();
    let freq = Estimate::proportion(exploded, cfg.paths);
    let mut table = Table::new("lyapunov_moment", &["t", "mean_phi", "std_error", "n"]);
    let mut ts = Vec::with_capacity(m);
    let mut logs = Vec::with_capacity(m);
    for (j, &k) in ks.iter().enumerate() {
        let vals: Vec<f64> = per_path.iter().map(|(_, p)| p[j]).filter(|v| !v.is_nan()).collect();
        let e = Estimate::from_samples(&vals);
        let t = cfg.horizon * k as f64 / cells as f64;
        table.rows.push(vec![t, e.mean, e.std_error, e.n as f64]);
        ts.push(t);
        logs.push(e.mean.ln());
    }
    let (fit, points) = fit_finite(&ts, &logs);
    let slope_finite = fit.is_some_and(|f| f.slope.is_finite());

    let mode = if growth.verdict == Verdict::Pass { Mode::Theorem } else { Mode::Refutation };
    let verdict = match (exploded == 0 && slope_finite, mode) {
        (true, Mode::Theorem) => Verdict::Pass,
        (true, Mode::Refutation) => Verdict::Inconclusive,
        (false, _) => Verdict::Fail,
    };
    let criterion = format!(
        "PASS iff no path reaches |X| >= {:e} (or overflows) before T = {} and the fitted slope of \
         t -> log E[Phi(|X_t|^2)] is finite; growth condition for the gauge must hold, else the \
         run only refutes (FAIL on explosion, INCONCLUSIVE otherwise)",
        cfg.r_explode, cfg.horizon
    );
    let mut rep = ctx.report(mode, verdict, criterion);
    rep.statistics.push(Statistic::new("explosion_frequency", freq));
    if exploded > 0 {
        rep.statistics.push(Statistic::new("explosion_time", Estimate::from_samples(&times)));
    }
    if let Some(last) = table.rows.last() {
        rep.statistics.push(Statistic {
            name: "phi_at_T".into(),
            value: last[1],
            std_error: last[2],
            n: last[3] as usize,
        });
    }
    rep.statistics.push(Statistic::exact("growth_constant", growth.c_fit, growth.samples));
    rep.fits.push(FittedExponent::from_fit("log_phi_moment_slope", fit, points));
    rep.notes.push(format!("growth check for the gauge: {} (tail slope {:.3e})", growth.verdict, growth.tail_slope));
    rep.notes.push(format!("scheme: {:?}, dt = {:e}", cfg.scheme, cfg.dt));
    rep.tables.push(table);
    Ok(rep)
}

// ---------------------------------------------------------------------------

/// Points for the generator sweep: radii from 1e-3 to 1e6 in fixed
/// directions (both axes in dimension one).
fn sweep_points(dim: usize) -> Vec<Vec<f64>> {
    let radii: Vec<f64> = (0..=90).map(|k| 1e-3 * 10f64.powf(k as f64 / 10.0)).collect();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[i] = s;
            dirs.push(e);
        }
    }
    if dim > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1c5);
        for _ in 0..8 {
            let v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let n = norm(&v);
            dirs.push(v.iter().map(|x| x / n).collect());
        }
    }
    let mut pts = vec![vec![0.0; dim]];
    for d in &dirs {
        for &r in &radii {
            pts.push(d.iter().map(|v| v * r).collect());
        }
    }
    pts
}

/// `max(0, sup_x LF(x) / F(x))` for `F(x) = Phi(|x|^2)` over the sweep,
/// with `L` the generator of the compensated equation.
pub(crate) fn generator_ratio_sup(model: &CoefficientModel, lyap: &LyapunovPair) -> Result<f64, LabError> {
    let m = model.dim();
    let n = model.brownian_dim();
    let c = model.coefficients();
    let nodes = if model.marks().total_mass() > 0.0 { model.marks().quadrature(32) } else { Vec::new() };
    let (mut f, mut comp, mut g, mut h, mut xh) =
        (vec![0.0; m], vec![0.0; m], vec![0.0; m * n], vec![0.0; m], vec![0.0; m]);
    let mut sup = 0.0f64;
    for x in sweep_points(m) {
        let xi: f64 = x.iter().map(|v| v * v).sum();
        let phi = lyap.phi(xi)?;
        let d1 = lyap.phi_prime(xi)?;
        let d2 = lyap.phi_second(xi)?;
        c.drift(&x, &mut f);
        c.compensator(&x, &mut comp);
        c.diffusion(&x, &mut g);
        let mut lf = 0.0;
        for k in 0..m {
            lf += 2.0 * d1 * x[k] * (f[k] - comp[k]);
        }
        for j in 0..n {
            let xg: f64 = (0..m).map(|i| x[i] * g[i * n + j]).sum();
            let gg: f64 = (0..m).map(|i| g[i * n + j] * g[i * n + j]).sum();
            lf += 0.5 * (4.0 * d2 * xg * xg + 2.0 * d1 * gg);
        }
        for (w, u) in &nodes {
            c.jump(&x, u, &mut h);
            for k in 0..m {
                xh[k] = x[k] + h[k];
            }
            let xi_h: f64 = xh.iter().map(|v| v * v).sum();
            lf += w * (lyap.phi(xi_h)? - phi);
        }
        let ratio = lf / phi;
        sup = if ratio.is_nan() { f64::INFINITY } else { sup.max(ratio) };
    }
    Ok(sup)
}

/// Whether `sup |h(x, u)|` stops growing in `|x|` over the sweep.
fn jump_bounded(model: &CoefficientModel) -> bool {
    if model.marks().total_mass() == 0.0 {
        return true;
    }
    let m = model.dim();
    let nodes = model.marks().quadrature(16);
    let c = model.coefficients();
    let mut h = vec![0.0; m];
    let (mut inner, mut outer) = (0.0f64, 0.0f64);
    for x in sweep_points(m) {
        let r = norm(&x);
        for (_, u) in &nodes {
            c.jump(&x, u, &mut h);
            let v = norm(&h);
            let v = if v.is_nan() { f64::INFINITY } else { v };
            if r <= 1e3 {
                inner = inner.max(v);
            } else {
                outer = outer.max(v);
            }
        }
    }
    outer <= inner * (1.0 + 1e-9) + 1e-12
}

pub fn escape_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, LabError> {
    let ctx = Context::new(cfg)?;
    let ExperimentKind::Escape { r_inner, ladder, gauge, vanish_tol } = &cfg.experiment else {
        return Err(wrong_kind(cfg, "escape"));
    };
    let dir_norm = ctx.x0.norm();
    if dir_norm == 0.0 {
        return Err(LabError::Config("escape uses x0 as a direction and needs it non-zero".into()));
    }
    let dir: Vec<f64> = cfg.x0.iter().map(|v| v / dir_norm).collect();
    let lyap = build_lyapunov(GrowthGauge::new(*gauge), Sign::Minus, 1e-10)?;
    let c = generator_ratio_sup(&ctx.model, &lyap)?;
    let bounded = jump_bounded(&ctx.model);
    let scheme = ctx.scheme();
    let starts =
        ladder.iter().map(|r| StateVector::new(dir.iter().map(|v| v * r).collect())).collect::<Result<Vec<_>, _>>()?;

    let hits = par_paths(cfg.paths, |path| {
        let noise = ctx.noise(path, cfg.dt)?;
        starts
            .iter()
            .map(|x0| {
                let tr = simulate(&ctx.model, x0, &noise, &scheme)?;
                let mut hit = false;
                each_state(&tr, |x| hit |= norm(x) <= *r_inner);
                Ok(hit)
            })
            .collect::<Result<Vec<bool>, LabError>>()
    })?;

    let mut table = Table::new("escape", &["radius", "probability", "std_error", "bound"]);
    let mut est = Vec::with_capacity(ladder.len());
    for (k, &r) in ladder.iter().enumerate() {
        let count = hits.iter().filter(|h| h[k]).count();
        let e = Estimate::proportion(count, cfg.paths);
        let bound = lyap.escape_bound(c, cfg.horizon, *r_inner, r)?;
        table.rows.push(vec![r, e.mean, e.std_error, bound]);
        est.push((e, bound));
    }
    let dominated = est.iter().all(|(e, b)| e.mean - 3.0 * e.std_error <= *b);
    let monotone = est.windows(2).all(|w| {
        let se = (w[0].0.std_error.powi(2) + w[1].0.std_error.powi(2)).sqrt();
        w[1].0.mean <= w[0].0.mean + 3.0 * se
    });
    let last = est.last().expect("ladder has two points").0;
    let vanishing = last.mean <= *vanish_tol;
    let holds = dominated && monotone && vanishing;
    let mode = if bounded { Mode::Theorem } else { Mode::Refutation };
    let verdict = match (holds, mode) {
        (true, Mode::Theorem) => Verdict::Pass,
        (true, Mode::Refutation) => Verdict::Inconclusive,
        (false, _) => Verdict::Fail,
    };
    let criterion = format!(
        "PASS iff P(inf_[0,T] |X| <= {r_inner}) is non-increasing along the ladder (3 combined standard \
         errors), lies below the Lyapunov bound minus 3 standard errors at every radius, and is at most \
         {vanish_tol} at the largest radius; jumps must be bounded, else the run only refutes"
    );
    let mut rep = ctx.report(mode, verdict, criterion);
    for (r, (e, _)) in ladder.iter().zip(&est) {
        rep.statistics.push(Statistic::new(format!("hit_probability_r{r}"), *e));
    }
    rep.statistics.push(Statistic::exact("generator_constant", c, sweep_points(ctx.model.dim()).len()));
    rep.notes.push(format!(
        "monotone: {monotone}, below bound: {dominated}, vanishing: {vanishing}, bounded jumps: {bounded}"
    ));
    rep.tables.push(table);
    Ok(rep)
}

// ---------------------------------------------------------------------------

pub fn uniqueness_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, LabError> {
    let ctx = Context::new(cfg)?;
    let ExperimentKind::Uniqueness { dt_ladder, expected_order, order_tol } = &cfg.experiment else {
        return Err(wrong_kind(cfg, "uniqueness"));
    };
    let ratios: Vec<u64> = dt_ladder.windows(2).map(|w| (w[0] / w[1]).round() as u64).collect();

    let errors = par_paths(cfg.paths, |path| {
        let seed = crate::noise::ScenarioSeed::new(cfg.seed, path);
        let mut coarse = ctx.noise(path, dt_ladder[0])?;
        let mut out = Vec::with_capacity(dt_ladder.len());
        for k in 0..dt_ladder.len() {
            let fine = coarse.refine(2, &seed)?;
            let a = simulate(&ctx.model, &ctx.x0, &coarse, &cfg.scheme_config(coarse.step()))?;
            let b = simulate(&ctx.model, &ctx.x0, &fine, &cfg.scheme_config(fine.step()))?;
            let err = if a.exploded() || b.exploded() {
                f64::INFINITY
            } else {
                a.last().iter().zip(b.last()).map(|(u, v)| (u - v) * (u - v)).sum()
            };
            out.push(err);
            if let Some(&r) = ratios.get(k) {
                coarse = if r == 2 { fine } else { coarse.refine(r, &seed)? };
            }
        }
        Ok(out)
    })?;

    let mut table = Table::new("strong_error", &["dt", "mean_squared_error", "std_error"]);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut all_finite = true;
    let mut all_zero = true;
    let mut stats = Vec::new();
    for (k, &dt) in dt_ladder.iter().enumerate() {
        let vals: Vec<f64> = errors.iter().map(|e| e[k]).collect();
        let e = Estimate::from_samples(&vals);
        all_finite &= e.mean.is_finite();
        all_zero &= e.mean == 0.0;
        table.rows.push(vec![dt, e.mean, e.std_error]);
        xs.push(dt.ln());
        ys.push(if e.mean > 0.0 { e.mean.ln() } else { f64::NAN });
        stats.push(Statistic::new(format!("squared_error_dt{dt:e}"), e));
    }
    let (fit, points) = fit_finite(&xs, &ys);
    let order = FittedExponent::from_fit("squared_error_order", fit, points);
    let positive = order.value.is_finite() && order.ci_low > 0.0;
    let on_target = expected_order.is_none_or(|p| (order.value - p).abs() <= *order_tol);
    let verdict = Verdict::from_bool(all_finite && (all_zero || (positive && on_target)));
    let criterion = match expected_order {
        Some(p) => format!(
            "PASS iff every E|X^dt_T - X^(dt/2)_T|^2 is finite and the fitted log-log slope has a 95% \
             interval above 0 and lies within {order_tol} of {p}"
        ),
        None => "PASS iff every E|X^dt_T - X^(dt/2)_T|^2 is finite and the fitted log-log slope has a 95% \
                 interval above 0"
            .to_string(),
    };
    let mut rep = ctx.report(Mode::Theorem, verdict, criterion);
    rep.statistics = stats;
    rep.fits.push(order);
    if all_zero {
        rep.notes.push("both arms agree exactly at every step".into());
    }
    rep.tables.push(table);
    Ok(rep)
}

// ---------------------------------------------------------------------------

/// Scalar sample points used to compare coefficients between models.
fn scalar_probe() -> Vec<f64> {
    let mut pts = vec![0.0];
    for k in -30..=30 {
        let r = 10f64.powf(k as f64 / 10.0);
        pts.push(r);
        pts.push(-r);
    }
    pts.sort_by(f64::total_cmp);
    pts
}

pub fn comparison_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, LabError> {
    let ctx = Context::new(cfg)?;
    let ExperimentKind::Comparison { model2, x0_2 } = &cfg.experiment else {
        return Err(wrong_kind(cfg, "comparison"));
    };
    let upper = model2.build()?;
    if ctx.model.dim() != 1 || upper.dim() != 1 {
        return Err(LabError::Config("comparison is defined in dimension one".into()));
    }
    if ctx.model.marks() != upper.marks() || ctx.model.brownian_dim() != upper.brownian_dim() {
        return Err(LabError::Config("compared models must share the noise (marks and Brownian dimension)".into()));
    }
    let (c1, c2) = (ctx.model.coefficients(), upper.coefficients());
    let n = ctx.model.brownian_dim();
    let nodes = ctx.model.marks().quadrature(8);
    let probe = scalar_probe();
    let mut drift_ordered = true;
    let mut h_monotone = true;
    let (mut a, mut b) = (vec![0.0; n.max(1)], vec![0.0; n.max(1)]);
    for &x in &probe {
        c1.diffusion(&[x], &mut a[..n]);
        c2.diffusion(&[x], &mut b[..n]);
        if a[..n] != b[..n] {
            return Err(LabError::Config(format!("models differ in g at x = {x}")));
        }
        for (_, u) in &nodes {
            c1.jump(&[x], u, &mut a[..1]);
            c2.jump(&[x], u, &mut b[..1]);
            if a[0] != b[0] {
                return Err(LabError::Config(format!("models differ in h at x = {x}, u = {u:?}")));
            }
        }
        c1.drift(&[x], &mut a[..1]);
        c2.drift(&[x], &mut b[..1]);
        drift_ordered &= a[0] <= b[0];
    }
    for w in probe.windows(2) {
        for (_, u) in &nodes {
            c1.jump(&[w[0]], u, &mut a[..1]);
            c1.jump(&[w[1]], u, &mut b[..1]);
            h_monotone &= a[0] <= b[0];
        }
    }
    let y0 = StateVector::new(x0_2.clone())?;
    let ordered_start = cfg.x0[0] <= x0_2[0];
    let scheme = ctx.scheme();

    let per_path = par_paths(cfg.paths, |path| {
        let noise = ctx.noise(path, cfg.dt)?;
        let lo = simulate(&ctx.model, &ctx.x0, &noise, &scheme)?;
        let hi = simulate(&upper, &y0, &noise, &scheme)?;
        let len = lo.len().min(hi.len());
        let (mut points, mut violations) = (0usize, 0usize);
        let mut check = |x: f64, y: f64| {
            points += 1;
            if x > y + 1e-9 * (1.0 + y.abs()) {
                violations += 1;
            }
        };
        for i in 0..len {
            if let (Some(p), Some(q)) = (lo.pre_jump(i), hi.pre_jump(i)) {
                check(p[0], q[0]);
            }
            check(lo.state(i)[0], hi.state(i)[0]);
        }
        Ok((points, violations, lo.exploded() || hi.exploded()))
    })?;

    let bad_paths = per_path.iter().filter(|p| p.1 > 0).count();
    let total_points: usize = per_path.iter().map(|p| p.0).sum();
    let bad_points: usize = per_path.iter().map(|p| p.1).sum();
    let exploded = per_path.iter().filter(|p| p.2).count();
    let mode = if drift_ordered && h_monotone && ordered_start { Mode::Theorem } else { Mode::Refutation };
    let verdict = match (bad_paths == 0, mode) {
        (true, Mode::Theorem) => Verdict::Pass,
        (true, Mode::Refutation) => Verdict::Inconclusive,
        (false, _) => Verdict::Fail,
    };
    let criterion = "PASS iff no (path, time) point has X1 > X2 + 1e-9 (1 + |X2|), pre-jump states included; \
                     ordered drifts, ordered starts and nondecreasing h are required, else the run only refutes"
        .to_string();
    let mut rep = ctx.report(mode, verdict, criterion);
    rep.statistics.push(Statistic::new("violation_path_fraction", Estimate::proportion(bad_paths, cfg.paths)));
    rep.statistics.push(Statistic::new("violation_point_fraction", Estimate::proportion(bad_points, total_points)));
    rep.statistics.push(Statistic::new("explosion_frequency", Estimate::proportion(exploded, cfg.paths)));
    rep.notes.push(format!(
        "upper model {}; drifts ordered on probe: {drift_ordered}; h nondecreasing on probe: {h_monotone}; \
         ordered start: {ordered_start}",
        upper.name()
    ));
    Ok(rep)
}

// ---------------------------------------------------------------------------

/// `|X_t(x) - X_t(y)|` at every reported state (pre-jump states included).
///
/// In dimension one a sign change of the difference across a continuous
/// step means the paths met inside the step, recorded as a zero.
fn separations(a: &Trajectory, b: &Trajectory) -> Vec<f64> {
    let len = a.len().min(b.len());
    let dim = a.dim();
    let mut out = Vec::with_capacity(len + a.jumps().len());
    let mut prev: Option<f64> = None;
    let mut push = |xa: &[f64], xb: &[f64], continuous: bool, out: &mut Vec<f64>| {
        let d: Vec<f64> = xa.iter().zip(xb).map(|(u, v)| u - v).collect();
        if dim == 1 {
            if continuous && prev.is_some_and(|p| p * d[0] < 0.0) {
                out.push(0.0);
            }
            prev = Some(d[0]);
        }
        out.push(norm(&d));
    };
    for i in 0..len {
        match (a.pre_jump(i), b.pre_jump(i)) {
            (Some(pa), Some(pb)) => {
                push(pa, pb, true, &mut out);
                push(a.state(i), b.state(i), false, &mut out);
            }
            _ => push(a.state(i), b.state(i), true, &mut out),
        }
    }
    out
}

/// Verdict on the jump map: `Some(true)` certified, `Some(false)` refuted,
/// `None` when a probe found nothing either way.
fn homeomorphism_status(model: &CoefficientModel) -> Result<(Option<bool>, String), LabError> {
    let spec = HomeoSampleSpec::default();
    match model.jump_inverse() {
        Some(cert) => {
            let r = check_jump_homeomorphism(model, Some(cert), &spec);
            match r {
                Ok(rep) if rep.verdict == Verdict::Pass => Ok((Some(true), "declared jump inverse verified".into())),
                Ok(rep) => Ok((Some(false), format!("declared jump inverse rejected ({})", rep.verdict))),
                Err(e) => Ok((Some(false), format!("declared jump inverse rejected: {e}"))),
            }
        }
        None => {
            let rep = check_jump_homeomorphism(model, None, &spec)?;
            match rep.verdict {
                Verdict::Fail => Ok((Some(false), "injectivity probe found a collision of x + h(x, u)".into())),
                _ => Ok((None, "no jump inverse declared; injectivity probe found no collision".into())),
            }
        }
    }
}

pub fn noncontact_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, LabError> {
    let ctx = Context::new(cfg)?;
    let ExperimentKind::Noncontact { y, truncation } = &cfg.experiment else {
        return Err(wrong_kind(cfg, "noncontact"));
    };
    let y0 = StateVector::new(y.clone())?;
    if y0.dim() != ctx.model.dim() {
        return Err(LabError::Config("y must match the model dimension".into()));
    }
    let gap = norm(&cfg.x0.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>());
    let floor = contact_floor(gap);
    let (status, status_note) = homeomorphism_status(&ctx.model)?;
    let mode = if status == Some(true) { Mode::Theorem } else { Mode::Refutation };
    let scheme = ctx.scheme();

    let per_path = par_paths(cfg.paths, |path| {
        let noise = ctx.noise(path, cfg.dt)?;
        let a = simulate(&ctx.model, &ctx.x0, &noise, &scheme)?;
        let b = simulate(&ctx.model, &y0, &noise, &scheme)?;
        let seps = separations(&a, &b);
        let min = seps.iter().copied().fold(f64::INFINITY, f64::min);
        let last = *seps.last().expect("at least the initial state");
        let inv: Vec<f64> = truncation
            .iter()
            .map(|&n| {
                let stop = seps.iter().copied().find(|s| *s <= 1.0 / n).unwrap_or(last);
                (stop.powi(-2)).min(n * n)
            })
            .collect();
        Ok((min, min < floor, inv, a.exploded() || b.exploded()))
    })?;

    let contacts = per_path.iter().filter(|p| p.1).count();
    let exploded = per_path.iter().filter(|p| p.3).count();
    let mins: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let mut table = Table::new("inverse_moment", &["truncation", "mean", "std_error"]);
    let mut rep_stats = vec![
        Statistic::new("contact_fraction", Estimate::proportion(contacts, cfg.paths)),
        Statistic::new("min_separation", Estimate::from_samples(&mins)),
        Statistic::new("explosion_frequency", Estimate::proportion(exploded, cfg.paths)),
    ];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, &n) in truncation.iter().enumerate() {
        let vals: Vec<f64> = per_path.iter().map(|p| p.2[k]).collect();
        let e = Estimate::from_samples(&vals);
        table.rows.push(vec![n, e.mean, e.std_error]);
        xs.push(n.ln());
        ys.push(e.mean.ln());
        rep_stats.push(Statistic::new(format!("inverse_moment_N{n}"), e));
    }
    let (fit, points) = fit_finite(&xs, &ys);
    let verdict = match (contacts == 0, mode) {
        (true, Mode::Theorem) => Verdict::Pass,
        (true, Mode::Refutation) => Verdict::Inconclusive,
        (false, _) => Verdict::Fail,
    };
    let criterion = format!(
        "PASS iff no path brings |X_t(x) - X_t(y)| below {floor:e} (or, in dimension one, changes its sign \
         across a continuous step); requires a verified jump inverse, else the run only refutes"
    );
    let mut rep = ctx.report(mode, verdict, criterion);
    rep.statistics = rep_stats;
    rep.fits.push(FittedExponent::from_fit("inverse_moment_growth", fit, points));
    rep.notes.push(status_note);
    rep.tables.push(table);
    Ok(rep)
}

// ---------------------------------------------------------------------------

pub fn flow_continuity_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, LabError> {
    let ctx = Context::new(cfg)?;
    let ExperimentKind::FlowContinuity { p, ladder, slope_tol } = &cfg.experiment else {
        return Err(wrong_kind(cfg, "flow_continuity"));
    };
    if !ctx.model.is_bounded() {
        return Err(LabError::Config(format!(
            "flow continuity needs bounded coefficients; apply a cutoff to {}",
            ctx.model.name()
        )));
    }
    let (status, status_note) = homeomorphism_status(&ctx.model)?;
    let mode = if status == Some(false) { Mode::Refutation } else { Mode::Theorem };
    let scheme = ctx.scheme();
    let gaps: Vec<f64> = ladder.iter().map(|k| 2f64.powi(-k)).collect();
    let starts = gaps
        .iter()
        .map(|g| {
            let mut y = cfg.x0.clone();
            y[0] += g;
            StateVector::new(y)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let per_path = par_paths(cfg.paths, |path| {
        let noise = ctx.noise(path, cfg.dt)?;
        let a = simulate(&ctx.model, &ctx.x0, &noise, &scheme)?;
        let mut moments = Vec::with_capacity(starts.len());
        let mut contact = false;
        let mut exploded = a.exploded();
        for (y0, g) in starts.iter().zip(&gaps) {
            let b = simulate(&ctx.model, y0, &noise, &scheme)?;
            exploded |= b.exploded();
            let seps = separations(&a, &b);
            contact |= seps.iter().any(|s| *s < contact_floor(*g));
            moments.push(if exploded { f64::INFINITY } else { seps.last().copied().unwrap_or(0.0).powf(2.0 * p) });
        }
        Ok((moments, contact, exploded))
    })?;

    let contacts = per_path.iter().filter(|r| r.1).count();
    let exploded = per_path.iter().filter(|r| r.2).count();
    let mut table = Table::new("flow_moment", &["separation", "moment", "std_error"]);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut stats = vec![
        Statistic::new("contact_fraction", Estimate::proportion(contacts, cfg.paths)),
        Statistic::new("explosion_frequency", Estimate::proportion(exploded, cfg.paths)),
    ];
    for (k, &g) in gaps.iter().enumerate() {
        let vals: Vec<f64> = per_path.iter().map(|r| r.0[k]).collect();
        let e = Estimate::from_samples(&vals);
        table.rows.push(vec![g, e.mean, e.std_error]);
        xs.push(g.ln());
        ys.push(if e.mean > 0.0 { e.mean.ln() } else { f64::NAN });
        stats.push(Statistic::new(format!("moment_sep2^-{}", ladder[k]), e));
    }
    let (fit, points) = fit_finite(&xs, &ys);
    let slope = FittedExponent::from_fit("moment_slope", fit, points);
    let threshold = p / 2.0 - slope_tol;
    let holds = exploded == 0 && slope.value.is_finite() && slope.value >= threshold;
    let verdict = match mode {
        Mode::Theorem => Verdict::from_bool(holds),
        Mode::Refutation => Verdict::Inconclusive,
    };
    let criterion = format!(
        "PASS iff the slope of log E|X_T(x) - X_T(y)|^{} against log|x - y| is at least {threshold} \
         (p/2 - {slope_tol}); a refuted jump homeomorphism makes the slope uninformative (INCONCLUSIVE)",
        2.0 * p
    );
    let mut rep = ctx.report(mode, verdict, criterion);
    rep.statistics = stats;
    rep.fits.push(slope);
    rep.notes.push(status_note);
    rep.tables.push(table);
    Ok(rep)
}

// ---------------------------------------------------------------------------

pub fn sup_moment_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, LabError> {
    let ctx = Context::new(cfg)?;
    let ExperimentKind::SupMoment { p } = &cfg.experiment else {
        return Err(wrong_kind(cfg, "sup_moment"));
    };
    let mark_moment = ctx.model.marks().moment(*p);
    let marks_ok = ctx.model.marks().total_mass() == 0.0 || mark_moment.is_some_and(f64::is_finite);
    let mode = if ctx.model.is_bounded() && marks_ok { Mode::Theorem } else { Mode::Refutation };
    let scheme = ctx.scheme();

    let sups = par_paths(2 * cfg.paths, |path| {
        let noise = ctx.noise(path, cfg.dt)?;
        let tr = simulate(&ctx.model, &ctx.x0, &noise, &scheme)?;
        if tr.exploded() {
            return Ok(f64::INFINITY);
        }
        let mut sup = 0.0f64;
        each_state(&tr, |x| sup = sup.max(norm(x)));
        Ok(sup.powf(*p))
    })?;
    let half = Estimate::from_samples(&sups[..cfg.paths]);
    let full = Estimate::from_samples(&sups);
    let finite = half.mean.is_finite() && full.mean.is_finite();
    let z = half.z_distance(&full);
    let stable = finite && z < 3.0;
    let verdict = match (stable, mode) {
        (true, Mode::Theorem) => Verdict::Pass,
        (true, Mode::Refutation) => Verdict::Inconclusive,
        (false, _) => Verdict::Fail,
    };
    let criterion = format!(
        "PASS iff E[sup_[0,T] |X|^{p}] is finite with {} and {} paths and the two estimates differ by less \
         than 3 combined standard errors; bounded coefficients and a finite mark moment are required, else \
         the run only refutes",
        cfg.paths,
        2 * cfg.paths
    );
    let mut rep = ctx.report(mode, verdict, criterion);
    rep.statistics.push(Statistic::new("sup_moment", half));
    rep.statistics.push(Statistic::new("sup_moment_doubled", full));
    rep.statistics.push(Statistic::exact("shift_in_standard_errors", z, 2 * cfg.paths));
    let exploded = sups.iter().filter(|s| s.is_infinite()).count();
    rep.statistics.push(Statistic::new("explosion_frequency", Estimate::proportion(exploded, 2 * cfg.paths)));
    if mode == Mode::Refutation {
        rep.notes.push(format!(
            "bounded coefficients: {}; mark moment of order {p}: {:?}",
            ctx.model.is_bounded(),
            mark_moment
        ));
    }
    Ok(rep)
}
