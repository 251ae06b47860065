use serde::{Deserialize, Serialize};

use super::CoefficientError;

/// Concrete growth gauges `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeKind {
    /// `log(e + s)` on `[0, inf)`.
    LogEPlus,
    /// `log s` on `[e, inf)`.
    Log,
    /// `log s * log log s` on `[e^e, inf)`.
    LogLogLog,
    /// `rho = value`; violates divergence of `rho`, kept as a quadrature surrogate.
    Constant { value: f64 },
    /// `s^eps`; violates `s rho'/rho -> 0`.
    Power { eps: f64 },
}

/// A growth gauge with its admissibility attestation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthGauge {
    pub kind: GaugeKind,
    /// User attestation that `int ds / (s rho(s) + 1)` diverges; not checkable.
    #[serde(default)]
    pub declared_divergent: bool,
}

/// Outcome of the finitary admissibility checks on a sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeReport {
    pub grid_min: f64,
    pub grid_max: f64,
    pub nondecreasing: bool,
    pub at_least_one: bool,
    pub unbounded_trend: bool,
    /// `s rho'(s) / rho(s)` at the first and last grid point.
    pub elasticity_head: f64,
    pub elasticity_tail: f64,
    pub elasticity_decreasing: bool,
    /// Increment of `Psi` over the upper half of the grid (log scale).
    pub psi_tail_increment: f64,
    pub declared_divergent: bool,
    pub admissible: bool,
}

impl GrowthGauge {
    pub fn new(kind: GaugeKind) -> Self {
        let declared_divergent = matches!(kind, GaugeKind::LogEPlus | GaugeKind::Log | GaugeKind::LogLogLog);
        GrowthGauge { kind, declared_divergent }
    }

    pub fn log_e_plus() -> Self {
        GrowthGauge::new(GaugeKind::LogEPlus)
    }

    pub fn log() -> Self {
        GrowthGauge::new(GaugeKind::Log)
    }

    pub fn constant(value: f64) -> Self {
        GrowthGauge::new(GaugeKind::Constant { value })
    }

    /// Lower end `K` of the domain of `rho`.
    pub fn threshold(&self) -> f64 {
        match self.kind {
            GaugeKind::Log => std::f64::consts::E,
            GaugeKind::LogLogLog => std::f64::consts::E.exp(),
            _ => 0.0,
        }
    }

    fn raw(&self, s: f64) -> (f64, f64) {
        match self.kind {
            GaugeKind::LogEPlus => {
                let e = std::f64::consts::E;
                ((e + s).ln(), 1.0 / (e + s))
            }
            GaugeKind::Log => (s.ln(), 1.0 / s),
            GaugeKind::LogLogLog => {
                let l = s.ln();
                let ll = l.ln();
                (l * ll, (ll + 1.0) / s)
            }
            GaugeKind::Constant { value } => (value, 0.0),
            GaugeKind::Power { eps } => (s.powf(eps), if s == 0.0 { 0.0 } else { eps * s.powf(eps - 1.0) }),
        }
    }

    fn check(&self, s: f64) -> Result<(), CoefficientError> {
        let k = self.threshold();
        if s.is_nan() || s < k {
            return Err(CoefficientError::GaugeDomain { s, threshold: k });
        }
        Ok(())
    }

    pub fn rho(&self, s: f64) -> Result<f64, CoefficientError> {
        self.check(s)?;
        Ok(self.raw(s).0)
    }

    pub fn rho_prime(&self, s: f64) -> Result<f64, CoefficientError> {
        self.check(s)?;
        Ok(self.raw(s).1)
    }

    /// `rho(max(s, K))`: the constant extension below the threshold used by
    /// the Lyapunov construction, which integrates from 0.
    pub fn rho_extended(&self, s: f64) -> f64 {
        self.raw(s.max(self.threshold())).0
    }

    /// Derivative of [`GrowthGauge::rho_extended`] (zero below `K`).
    pub fn rho_prime_extended(&self, s: f64) -> f64 {
        if s < self.threshold() {
            0.0
        } else {
            self.raw(s).1
        }
    }

    /// Necessary conditions for admissibility on a geometric grid of
    /// `points` values from `max(K, 1)` to `s_max`.
    pub fn admissibility(&self, s_max: f64, points: usize) -> GaugeReport {
        let lo = self.threshold().max(1.0);
        let n = points.max(4);
        let grid: Vec<f64> = (0..n).map(|i| lo * (s_max / lo).powf(i as f64 / (n - 1) as f64)).collect();
        let rho: Vec<f64> = grid.iter().map(|&s| self.raw(s).0).collect();
        let el: Vec<f64> = grid.iter().zip(&rho).map(|(&s, &r)| s * self.raw(s).1 / r).collect();
        let nondecreasing = rho.windows(2).all(|w| w[1] >= w[0]);
        let at_least_one = rho.iter().all(|&r| r >= 1.0);
        let unbounded_trend = rho[n - 1] > rho[n / 2] && rho[n / 2] > rho[0];
        let tail = &el[n / 2..];
        let elasticity_decreasing = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12) && el[n - 1] < el[0];
        // Psi increment over the upper half by trapezoid in log s.
        let mut psi_tail_increment = 0.0;
        for i in n / 2..n - 1 {
            let g = |k: usize| grid[k] / (grid[k] * rho[k] + 1.0);
            psi_tail_increment += 0.5 * (g(i) + g(i + 1)) * (grid[i + 1] / grid[i]).ln();
        }
        let admissible = nondecreasing
            && at_least_one
            && unbounded_trend
            && elasticity_decreasing
            && psi_tail_increment > 0.0
            && self.declared_divergent;
        GaugeReport {
            grid_min: lo,
            grid_max: s_max,
            nondecreasing,
            at_least_one,
            unbounded_trend,
            elasticity_head: el[0],
            elasticity_tail: el[n - 1],
            elasticity_decreasing,
            psi_tail_increment,
            declared_divergent: self.declared_divergent,
            admissible,
        }
    }
}
