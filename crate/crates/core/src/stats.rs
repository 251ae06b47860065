//! Order-independent reductions and small regression helpers.
//!
//! Every reduction here takes a slice in a fixed order and sums pairwise,
//! so results depend only on the data, never on how workers produced it.

use serde::{Deserialize, Serialize};

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// A sample mean together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate { mean: f64::NAN, std_error: f64::NAN, n };
        }
        let mean = pairwise_sum(xs) / n as f64;
        if n == 1 || !mean.is_finite() {
            return Estimate { mean, std_error: if mean.is_finite() { 0.0 } else { f64::NAN }, n };
        }
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&dev) / (n as f64 - 1.0);
        Estimate { mean, std_error: (var / n as f64).sqrt(), n }
    }

    /// Bernoulli proportion `k / n` with the binomial standard error.
    pub fn proportion(k: usize, n: usize) -> Self {
        if n == 0 {
            return Estimate { mean: f64::NAN, std_error: f64::NAN, n };
        }
        let p = k as f64 / n as f64;
        Estimate { mean: p, std_error: (p * (1.0 - p) / n as f64).sqrt(), n }
    }

    /// `|self - other|` measured in combined standard errors.
    pub fn z_distance(&self, other: &Estimate) -> f64 {
        let se = (self.std_error.powi(2) + other.std_error.powi(2)).sqrt();
        let d = (self.mean - other.mean).abs();
        if se == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / se
        }
    }
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residual variance.
    pub slope_std_error: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn ols(xs: &[f64], ys: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return None;
        }
        let nf = n as f64;
        let mx = pairwise_sum(xs) / nf;
        let my = pairwise_sum(ys) / nf;
        let sxx: Vec<f64> = xs.iter().map(|x| (x - mx) * (x - mx)).collect();
        let sxy: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
        let sxx = pairwise_sum(&sxx);
        if sxx == 0.0 {
            return None;
        }
        let slope = pairwise_sum(&sxy) / sxx;
        let intercept = my - slope * mx;
        let slope_std_error = if n > 2 {
            let res: Vec<f64> = xs
                .iter()
                .zip(ys)
                .map(|(x, y)| {
                    let r = y - intercept - slope * x;
                    r * r
                })
                .collect();
            (pairwise_sum(&res) / (nf - 2.0) / sxx).sqrt()
        } else {
            0.0
        };
        Some(LinearFit { slope, intercept, slope_std_error, n })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_exact_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
    }

    #[test]
    fn estimate_of_constant_has_zero_error() {
        let e = Estimate::from_samples(&[2.5; 10]);
        assert_eq!(e.mean, 2.5);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn proportion_standard_error() {
        let e = Estimate::proportion(25, 100);
        assert_eq!(e.mean, 0.25);
        assert!((e.std_error - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x).collect();
        let fit = LinearFit::ols(&xs, &ys).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-14);
        assert!((fit.intercept - 1.0).abs() < 1e-14);
        assert!(fit.slope_std_error < 1e-12);
    }
}
