use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::CoefficientError;
use crate::quadrature::{gauss_hermite_normal, gauss_legendre};

fn one() -> usize {
    1
}

/// Normalized law of a single mark (the measure divided by its total mass).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkLaw {
    /// Independent `N(mean, std^2)` components.
    Gaussian {
        #[serde(default)]
        mean: f64,
        std: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    /// Uniform on the closed ball of the given radius.
    UniformBall {
        radius: f64,
        #[serde(default = "one")]
        dim: usize,
    },
    /// Uniform on an interval (dimension 1).
    Uniform { low: f64, high: f64 },
    /// Dirac mass.
    PointMass { at: Vec<f64> },
}

impl MarkLaw {
    pub fn dim(&self) -> usize {
        match self {
            MarkLaw::Gaussian { dim, .. } | MarkLaw::UniformBall { dim, .. } => *dim,
            MarkLaw::Uniform { .. } => 1,
            MarkLaw::PointMass { at } => at.len(),
        }
    }

    fn validate(&self) -> Result<(), CoefficientError> {
        let bad = |msg: &str| Err(CoefficientError::Config(format!("mark law: {msg}")));
        match self {
            MarkLaw::Gaussian { mean, std, dim } => {
                if *dim == 0 {
                    return bad("dim must be positive");
                }
                if !(std.is_finite() && *std > 0.0 && mean.is_finite()) {
                    return bad("gaussian needs finite mean and std > 0");
                }
            }
            MarkLaw::UniformBall { radius, dim } => {
                if *dim == 0 {
                    return bad("dim must be positive");
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad("uniform_ball needs radius > 0");
                }
            }
            MarkLaw::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return bad("uniform needs finite low < high");
                }
            }
            MarkLaw::PointMass { at } => {
                if at.is_empty() || at.iter().any(|v| !v.is_finite()) {
                    return bad("point_mass needs a finite, non-empty location");
                }
            }
        }
        Ok(())
    }
}

/// Finite mark measure `mu = total_mass * law`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkSpace {
    law: MarkLaw,
    total_mass: f64,
}

impl MarkSpace {
    pub fn new(law: MarkLaw, total_mass: f64) -> Result<Self, CoefficientError> {
        law.validate()?;
        if !(total_mass.is_finite() && total_mass >= 0.0) {
            return Err(CoefficientError::Config(format!(
                "total jump intensity must be finite and non-negative, got {total_mass}"
            )));
        }
        Ok(MarkSpace { law, total_mass })
    }

    /// No jumps at all; marks are one-dimensional points at the origin.
    pub fn none() -> Self {
        MarkSpace { law: MarkLaw::PointMass { at: vec![0.0] }, total_mass: 0.0 }
    }

    pub fn law(&self) -> &MarkLaw {
        &self.law
    }

    pub fn dim(&self) -> usize {
        self.law.dim()
    }

    /// `lambda = mu(U)`.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn with_total_mass(&self, total_mass: f64) -> Result<Self, CoefficientError> {
        MarkSpace::new(self.law.clone(), total_mass)
    }

    /// `sup |u|` over the support, when bounded.
    pub fn bound(&self) -> Option<f64> {
        match &self.law {
            MarkLaw::Gaussian { .. } => None,
            MarkLaw::UniformBall { radius, .. } => Some(*radius),
            MarkLaw::Uniform { low, high } => Some(low.abs().max(high.abs())),
            MarkLaw::PointMass { at } => Some(norm(at)),
        }
    }

    /// Signed first moment `int u mu(du)`.
    pub fn first_moment(&self) -> Vec<f64> {
        let lam = self.total_mass;
        match &self.law {
            MarkLaw::Gaussian { mean, dim, .. } => vec![lam * mean; *dim],
            MarkLaw::UniformBall { dim, .. } => vec![0.0; *dim],
            MarkLaw::Uniform { low, high } => vec![lam * 0.5 * (low + high)],
            MarkLaw::PointMass { at } => at.iter().map(|a| lam * a).collect(),
        }
    }

    /// Draw one normalized mark into `out`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.law {
            MarkLaw::Gaussian { mean, std, .. } => {
                for v in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = mean + std * z;
                }
            }
            MarkLaw::UniformBall { radius, dim } => {
                if *dim == 1 {
                    out[0] = radius * (2.0 * rng.random::<f64>() - 1.0);
                } else {
                    let mut r2 = 0.0;
                    for v in out.iter_mut() {
                        let z: f64 = StandardNormal.sample(rng);
                        *v = z;
                        r2 += z * z;
                    }
                    let scale = radius * rng.random::<f64>().powf(1.0 / *dim as f64) / r2.sqrt();
                    for v in out.iter_mut() {
                        *v *= scale;
                    }
                }
            }
            MarkLaw::Uniform { low, high } => {
                out[0] = low + (high - low) * rng.random::<f64>();
            }
            MarkLaw::PointMass { at } => out.copy_from_slice(at),
        }
    }

    /// `int |u|^p mu(du)`; closed form where one exists, Gauss–Hermite for a
    /// shifted one-dimensional Gaussian, `None` otherwise.
    pub fn moment(&self, p: f64) -> Option<f64> {
        let lam = self.total_mass;
        let m = match &self.law {
            MarkLaw::Gaussian { mean, std, dim } => {
                if *mean == 0.0 {
                    let d = *dim as f64;
                    std.powf(p) * 2f64.powf(p / 2.0) * libm::tgamma((d + p) / 2.0) / libm::tgamma(d / 2.0)
                } else if *dim == 1 {
                    gauss_hermite_normal(64).iter().map(|(z, w)| w * (mean + std * z).abs().powf(p)).sum()
                } else {
                    return None;
                }
            }
            MarkLaw::UniformBall { radius, dim } => {
                let d = *dim as f64;
                radius.powf(p) * d / (d + p)
            }
            MarkLaw::Uniform { low, high } => {
                let (a, b) = (*low, *high);
                let q = p + 1.0;
                let mass = if a >= 0.0 {
                    (b.powf(q) - a.powf(q)) / q
                } else if b <= 0.0 {
                    (a.abs().powf(q) - b.abs().powf(q)) / q
                } else {
                    (a.abs().powf(q) + b.powf(q)) / q
                };
                mass / (b - a)
            }
            MarkLaw::PointMass { at } => norm(at).powf(p),
        };
        Some(lam * m)
    }

    /// Fixed nodes `(weight, mark)` with weights summing to `lambda`.
    ///
    /// One-dimensional laws use Gauss rules; higher-dimensional continuous
    /// laws fall back to a fixed-seed Monte Carlo cloud of `n` points.
    pub fn quadrature(&self, n: usize) -> Vec<(f64, Vec<f64>)> {
        let lam = self.total_mass;
        let n = n.max(1);
        match &self.law {
            MarkLaw::PointMass { at } => vec![(lam, at.clone())],
            MarkLaw::Gaussian { mean, std, dim: 1 } => {
                gauss_hermite_normal(n).into_iter().map(|(z, w)| (lam * w, vec![mean + std * z])).collect()
            }
            MarkLaw::UniformBall { radius, dim: 1 } => {
                gauss_legendre(n).into_iter().map(|(z, w)| (lam * w / 2.0, vec![radius * z])).collect()
            }
            MarkLaw::Uniform { low, high } => {
                let (c, h) = (0.5 * (low + high), 0.5 * (high - low));
                gauss_legendre(n).into_iter().map(|(z, w)| (lam * w / 2.0, vec![c + h * z])).collect()
            }
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(0x6d61_726b_6e6f_6465);
                let d = self.dim();
                (0..n)
                    .map(|_| {
                        let mut u = vec![0.0; d];
                        self.sample(&mut rng, &mut u);
                        (lam / n as f64, u)
                    })
                    .collect()
            }
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn gaussian_second_moment_is_variance_times_mass() {
        let ms = MarkSpace::new(MarkLaw::Gaussian { mean: 0.0, std: 0.5, dim: 1 }, 2.0).unwrap();
        approx(ms.moment(2.0).unwrap(), 2.0 * 0.25, 1e-14);
        approx(ms.moment(4.0).unwrap(), 2.0 * 3.0 * 0.0625, 1e-13);
    }

    #[test]
    fn quadrature_reproduces_moments() {
        for law in [
            MarkLaw::Gaussian { mean: 0.0, std: 0.7, dim: 1 },
            MarkLaw::Gaussian { mean: 0.3, std: 0.7, dim: 1 },
            MarkLaw::UniformBall { radius: 0.5, dim: 1 },
            MarkLaw::Uniform { low: -0.2, high: 0.6 },
            MarkLaw::PointMass { at: vec![0.4] },
        ] {
            let ms = MarkSpace::new(law, 1.5).unwrap();
            let nodes = ms.quadrature(40);
            let mass: f64 = nodes.iter().map(|(w, _)| w).sum();
            approx(mass, 1.5, 1e-12);
            let m4: f64 = nodes.iter().map(|(w, u)| w * u[0].powi(4)).sum();
            approx(m4, ms.moment(4.0).unwrap(), 1e-10);
        }
    }

    #[test]
    fn uniform_ball_sample_stays_in_ball() {
        let ms = MarkSpace::new(MarkLaw::UniformBall { radius: 0.5, dim: 3 }, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut u = [0.0; 3];
        for _ in 0..1000 {
            ms.sample(&mut rng, &mut u);
            assert!(norm(&u) <= 0.5 + 1e-15);
        }
    }

    #[test]
    fn rejects_bad_laws() {
        assert!(MarkSpace::new(MarkLaw::Gaussian { mean: 0.0, std: 0.0, dim: 1 }, 1.0).is_err());
        assert!(MarkSpace::new(MarkLaw::Uniform { low: 1.0, high: 1.0 }, 1.0).is_err());
        assert!(MarkSpace::new(MarkLaw::PointMass { at: vec![0.0] }, f64::INFINITY).is_err());
        assert!(MarkSpace::new(MarkLaw::PointMass { at: vec![0.0] }, -1.0).is_err());
    }
}
