use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::special::ln_gamma;
use crate::error::{domain, Error, Result};

const MLE_MAX_ITER: usize = 100;
const MLE_TOL: f64 = 1e-8;

/// Weibull distribution with shape `k` and scale `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    pub k: f64,
    pub lambda: f64,
}

impl WeibullParams {
    pub fn new(k: f64, lambda: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return domain(format!("Weibull shape must be finite and > 0, got {k}"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!("Weibull scale must be finite and > 0, got {lambda}"));
        }
        Ok(Self { k, lambda })
    }

    /// Density; zero on the negative half-line.
    pub fn pdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        let z = y / self.lambda;
        if y == 0.0 {
            return match self.k {
                k if k < 1.0 => f64::INFINITY,
                k if k == 1.0 => 1.0 / self.lambda,
                _ => 0.0,
            };
        }
        (self.k / self.lambda) * z.powf(self.k - 1.0) * (-z.powf(self.k)).exp()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        -(-(y / self.lambda).powf(self.k)).exp_m1()
    }

    /// `λ Γ(1 + 1/k)`.
    pub fn mean(&self) -> f64 {
        self.lambda * ln_gamma(1.0 + 1.0 / self.k).exp()
    }

    /// `λ² (Γ(1 + 2/k) − Γ²(1 + 1/k))`.
    pub fn variance(&self) -> f64 {
        let g1 = ln_gamma(1.0 + 1.0 / self.k).exp();
        let g2 = ln_gamma(1.0 + 2.0 / self.k).exp();
        self.lambda * self.lambda * (g2 - g1 * g1)
    }

    /// Inverse-CDF transform of a uniform variate `u ∈ (0, 1)`.
    pub fn quantile_of_uniform(&self, u: f64) -> f64 {
        self.lambda * (-u.ln()).powf(1.0 / self.k)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        self.quantile_of_uniform(u)
    }
}

/// Two-parameter maximum-likelihood fit.
///
/// The shape solves the profile-likelihood equation
/// `Σ yᵏ ln y / Σ yᵏ − 1/k − mean(ln y) = 0` by safeguarded Newton iteration;
/// the scale then follows as `(mean yᵏ)^{1/k}`.
pub fn fit_weibull_mle(samples: &[f64]) -> Result<WeibullParams> {
    if samples.len() < 10 {
        return domain(format!(
            "Weibull MLE needs at least 10 samples, got {}",
            samples.len()
        ));
    }
    if let Some(bad) = samples.iter().find(|y| !(**y > 0.0) || !y.is_finite()) {
        return domain(format!("Weibull MLE requires finite positive samples, found {bad}"));
    }
    let n = samples.len() as f64;
    let logs: Vec<f64> = samples.iter().map(|y| y.ln()).collect();
    let max_log = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_log = logs.iter().cloned().fold(f64::INFINITY, f64::min);
    if max_log - min_log < 1e-12 {
        return Err(Error::DegenerateData(
            "all samples are equal; the Weibull shape is unidentifiable".into(),
        ));
    }
    let mean_log = logs.iter().sum::<f64>() / n;
    // Work with y / max(y) so that yᵏ never overflows.
    let centered: Vec<f64> = logs.iter().map(|l| l - max_log).collect();

    // Sums of w = (y/ymax)^k, w ln y, w ln² y.
    let moments = |k: f64| {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (c, l) in centered.iter().zip(&logs) {
            let w = (k * c).exp();
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        (s0, s1, s2)
    };
    let profile = |k: f64| {
        let (s0, s1, s2) = moments(k);
        let a = s1 / s0;
        let g = a - 1.0 / k - mean_log;
        let dg = s2 / s0 - a * a + 1.0 / (k * k);
        (g, dg)
    };

    // Gumbel moment match on ln y as the starting point.
    let var_log = logs.iter().map(|l| (l - mean_log).powi(2)).sum::<f64>() / (n - 1.0);
    let mut k = std::f64::consts::PI / (6.0 * var_log).sqrt();

    for _ in 0..MLE_MAX_ITER {
        let (g, dg) = profile(k);
        let mut step = g / dg;
        // g is increasing in k; halve until the iterate stays positive.
        while k - step <= 0.0 {
            step *= 0.5;
        }
        k -= step;
        if step.abs() < MLE_TOL {
            let (s0, _, _) = moments(k);
            let log_lambda = max_log + (s0 / n).ln() / k;
            return WeibullParams::new(k, log_lambda.exp());
        }
    }
    Err(Error::NoConvergence {
        what: "Weibull shape profile equation".into(),
        iterations: MLE_MAX_ITER,
    })
}
