use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::special::ln_gamma;
use crate::error::{domain, Result};

/// Inverse-gamma distribution with shape `alpha` and scale `beta`.
///
/// Construction only requires `alpha > 0` so the density can be evaluated on
/// textbook cases; the `alpha > 2` restriction of the evidential prior is
/// enforced by [`crate::evidential_weibull::EvidentialParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvGammaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl InvGammaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return domain(format!("inverse-gamma shape must be finite and > 0, got {alpha}"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return domain(format!("inverse-gamma scale must be finite and > 0, got {beta}"));
        }
        Ok(Self { alpha, beta })
    }

    pub fn ln_pdf(&self, theta: f64) -> Result<f64> {
        if !(theta > 0.0) {
            return domain(format!("inverse-gamma density needs theta > 0, got {theta}"));
        }
        let (a, b) = (self.alpha, self.beta);
        Ok(a * b.ln() - ln_gamma(a) - (a + 1.0) * theta.ln() - b / theta)
    }

    /// `(β^α / Γ(α)) θ^{−(α+1)} e^{−β/θ}`.
    pub fn pdf(&self, theta: f64) -> Result<f64> {
        self.ln_pdf(theta).map(f64::exp)
    }

    /// `β / (α − 1)`, infinite for `α ≤ 1`.
    pub fn mean(&self) -> f64 {
        if self.alpha <= 1.0 {
            f64::INFINITY
        } else {
            self.beta / (self.alpha - 1.0)
        }
    }

    /// `β² / ((α − 1)² (α − 2))`, infinite for `α ≤ 2`.
    pub fn variance(&self) -> f64 {
        if self.alpha <= 2.0 {
            f64::INFINITY
        } else {
            let am1 = self.alpha - 1.0;
            self.beta * self.beta / (am1 * am1 * (self.alpha - 2.0))
        }
    }

    /// Reciprocal of a Gamma(shape α, rate β) draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }

    pub fn sampler(&self) -> InvGammaSampler {
        InvGammaSampler {
            gamma: Gamma::new(self.alpha, 1.0 / self.beta).expect("validated parameters"),
        }
    }
}

/// Reusable sampler; avoids rebuilding the gamma sampler per draw.
#[derive(Debug, Clone, Copy)]
pub struct InvGammaSampler {
    gamma: Gamma<f64>,
}

impl Distribution<f64> for InvGammaSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        1.0 / self.gamma.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn draws(p: InvGammaParams, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = p.sampler();
        (0..n).map(|_| s.sample(&mut rng)).collect()
    }

    #[test]
    fn pdf_values() {
        let p = InvGammaParams::new(1.0, 1.0).unwrap();
        assert!((p.pdf(1.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(p.pdf(0.0).is_err());
        assert!(p.pdf(-2.0).is_err());
        assert_eq!(InvGammaParams::new(3.0, 4.0).unwrap().mean(), 2.0);
    }

    #[test]
    fn sample_moments() {
        let xs = draws(InvGammaParams::new(3.0, 4.0).unwrap(), 1_000_000, 1);
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((m / 2.0 - 1.0).abs() < 0.01, "mean {m}");

        let p = InvGammaParams::new(4.0, 2.0).unwrap();
        assert!((p.variance() - 4.0 / 18.0).abs() < 1e-15);
        let xs = draws(p, 1_000_000, 2);
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((v / p.variance() - 1.0).abs() < 0.03, "var {v}");
    }

    #[test]
    fn same_seed_same_sequence() {
        let p = InvGammaParams::new(2.5, 0.7).unwrap();
        assert_eq!(draws(p, 50, 9), draws(p, 50, 9));
        assert_ne!(draws(p, 50, 9), draws(p, 50, 10));
    }
}
