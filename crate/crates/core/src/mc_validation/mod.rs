//! Independent checks of the closed-form evidential formulas: the sampling
//! chain `θ ~ Γ⁻¹(α, β)`, `λ = θ^{1/k}`, `y ~ Weibull(k, λ)`; direct
//! quadrature of the defining integral; and central finite differences.

pub mod quadrature;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::Serialize;

use crate::distributions::{ln_gamma, WeibullParams};
use crate::error::{domain, Error, Result};
use crate::evidential_weibull::{self as ew, EvidentialParams};
use quadrature::{integrate_to_infinity, QuadTolerance};

pub use quadrature::{integrate, integrate_real_line, QuadResult};

/// Fewer draws than this cannot give a meaningful moment comparison.
pub const MIN_MOMENT_SAMPLES: usize = 10_000;
/// Two-sided pass threshold in standard errors.
pub const PASS_Z: f64 = 4.0;

/// Draws of the scale `λ = θ^{1/k}`, `θ ~ Γ⁻¹(α, β)`.
pub fn sample_scale(ev: &EvidentialParams, k: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior = ev.prior().sampler();
    (0..n).map(|_| prior.sample(&mut rng).powf(1.0 / k)).collect()
}

/// Draws of the target through the full chain `θ → λ → y`.
pub fn sample_predictive(ev: &EvidentialParams, k: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior = ev.prior().sampler();
    (0..n)
        .map(|_| {
            let lambda = prior.sample(&mut rng).powf(1.0 / k);
            WeibullParams { k, lambda }.sample(&mut rng)
        })
        .collect()
}

/// Sample mean, sample variance and their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub mean: f64,
    pub variance: f64,
    pub mean_std_error: f64,
    pub variance_std_error: f64,
}

pub fn sample_moments(xs: &[f64]) -> SampleMoments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in xs {
        let d2 = (x - mean) * (x - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    let variance = m2 / (n - 1.0);
    let m2 = m2 / n;
    let m4 = m4 / n;
    SampleMoments {
        mean,
        variance,
        mean_std_error: (variance / n).sqrt(),
        variance_std_error: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McMomentReport {
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub samples: usize,
    pub analytic_mean: f64,
    pub empirical_mean: f64,
    pub mean_std_error: f64,
    pub analytic_variance: f64,
    pub empirical_variance: f64,
    pub variance_std_error: f64,
    pub mean_pass: bool,
    /// `None` when the variance comparison is not meaningful (see `note`).
    pub variance_pass: Option<bool>,
    pub note: String,
}

impl McMomentReport {
    pub fn passed(&self) -> bool {
        self.mean_pass && self.variance_pass.unwrap_or(true)
    }

    pub fn mean_rel_error(&self) -> f64 {
        (self.empirical_mean / self.analytic_mean - 1.0).abs()
    }

    pub fn variance_rel_error(&self) -> f64 {
        (self.empirical_variance / self.analytic_variance - 1.0).abs()
    }
}

/// Compares `mean_prediction` / `predictive_variance` with the sample moments
/// of `λ Γ(1 + 1/k)` at `PASS_Z` standard errors.
///
/// The variance comparison needs a finite fourth moment of `λ` (`α > 4/k`) for
/// its standard error to exist; outside that range it is reported but not graded.
pub fn validate_moments(ev: &EvidentialParams, k: f64, n: usize, seed: u64) -> Result<McMomentReport> {
    if n < MIN_MOMENT_SAMPLES {
        return domain(format!(
            "moment validation needs at least {MIN_MOMENT_SAMPLES} samples, got {n}"
        ));
    }
    let analytic = ew::predict(k, ev)?;
    let g = ln_gamma(1.0 + 1.0 / k).exp();
    let z: Vec<f64> = sample_scale(ev, k, n, seed).into_iter().map(|l| l * g).collect();
    let m = sample_moments(&z);
    let mean_pass = (m.mean - analytic.mean).abs() <= PASS_Z * m.mean_std_error;

    let (variance_pass, note) = if analytic.variance.is_infinite() {
        (
            Some(false),
            format!(
                "inconsistent: analytic variance is infinite (alpha <= 2/k = {:.4}) while the empirical variance is {}",
                2.0 / k,
                m.variance
            ),
        )
    } else if ev.alpha <= 4.0 / k {
        (
            None,
            format!(
                "variance not graded: fourth moment infinite for alpha <= 4/k = {:.4}; MC error is unbounded",
                4.0 / k
            ),
        )
    } else {
        (
            Some((m.variance - analytic.variance).abs() <= PASS_Z * m.variance_std_error),
            String::new(),
        )
    };
    Ok(McMomentReport {
        k,
        alpha: ev.alpha,
        beta: ev.beta,
        samples: n,
        analytic_mean: analytic.mean,
        empirical_mean: m.mean,
        mean_std_error: m.mean_std_error,
        analytic_variance: analytic.variance,
        empirical_variance: m.variance,
        variance_std_error: m.variance_std_error,
        mean_pass,
        variance_pass,
        note,
    })
}

/// Tolerance used by [`quadrature_marginal`]; tighter than `1e-10` absolute.
pub const MARGINAL_TOLERANCE: QuadTolerance = QuadTolerance {
    abs: 1e-14,
    rel: 1e-12,
    max_intervals: 4000,
};

/// `∫₀^∞ p(y | θ, k) p(θ | α, β) dθ` by adaptive quadrature.
pub fn quadrature_marginal(y: f64, k: f64, ev: &EvidentialParams) -> Result<f64> {
    if !(y > 0.0) {
        return domain(format!("quadrature oracle needs y > 0, got {y}"));
    }
    let (a, b) = (ev.alpha, ev.beta);
    let yk = y.powf(k);
    let log_const = k.ln() + (k - 1.0) * y.ln() + a * b.ln() - ln_gamma(a);
    // Weibull(y | θ) · InvGamma(θ | α, β) in log form
    let log_f = |theta: f64| {
        let lt = theta.ln();
        log_const - lt - yk / theta - (a + 1.0) * lt - b / theta
    };
    // Scale by the peak so the tolerance is relative to the integrand's own size.
    let mode = (yk + b) / (a + 2.0);
    let peak = log_f(mode);
    let integrand = |theta: f64| {
        if theta <= 0.0 {
            0.0
        } else {
            (log_f(theta) - peak).exp()
        }
    };
    integrate_to_infinity(integrand, 0.0, mode, MARGINAL_TOLERANCE).map(|r| r.value * peak.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureCheck {
    pub y: f64,
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
    pub closed_form: f64,
    pub quadrature: f64,
    pub rel_error: f64,
    pub pass: bool,
}

/// Closed-form marginal vs [`quadrature_marginal`] at relative tolerance `rel_tol`.
pub fn check_marginal(y: f64, k: f64, ev: &EvidentialParams, rel_tol: f64) -> Result<QuadratureCheck> {
    let closed_form = ew::marginal_likelihood(y, k, ev)?;
    let quadrature = quadrature_marginal(y, k, ev)?;
    let rel_error = (closed_form - quadrature).abs() / closed_form.abs().max(f64::MIN_POSITIVE);
    Ok(QuadratureCheck {
        y,
        k,
        alpha: ev.alpha,
        beta: ev.beta,
        closed_form,
        quadrature,
        rel_error,
        pass: rel_error <= rel_tol,
    })
}

/// `∫₀^∞ y^power · marginal(y) dy`.
pub fn marginal_moment_by_quadrature(power: i32, k: f64, ev: &EvidentialParams) -> Result<f64> {
    let scale = ew::mean_prediction(k, ev).unwrap_or(1.0);
    let tol = QuadTolerance {
        abs: 1e-12,
        rel: 1e-10,
        max_intervals: 4000,
    };
    integrate_to_infinity(
        |y| {
            if y <= 0.0 {
                return 0.0;
            }
            ew::marginal_likelihood(y, k, ev).map_or(f64::NAN, |p| p * y.powi(power))
        },
        0.0,
        scale,
        tol,
    )
    .map(|r| r.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_coordinate: usize,
}

/// Central-difference check of `analytic` against `f` at `point`.
///
/// Relative error per coordinate is `|a − n| / max(|a|, |n|, 1e-12)`.
pub fn grad_check<F>(f: F, analytic: &[f64], point: &[f64], h: f64) -> Result<GradCheck>
where
    F: Fn(&[f64]) -> f64,
{
    if analytic.len() != point.len() {
        return Err(Error::Shape(format!(
            "{} analytic partials for a {}-dimensional point",
            analytic.len(),
            point.len()
        )));
    }
    let mut x = point.to_vec();
    let mut worst = GradCheck {
        max_rel_error: 0.0,
        worst_coordinate: 0,
    };
    for i in 0..point.len() {
        x[i] = point[i] + h;
        let up = f(&x);
        x[i] = point[i] - h;
        let down = f(&x);
        x[i] = point[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Probe { coordinate: i });
        }
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-12);
        if rel > worst.max_rel_error {
            worst = GradCheck {
                max_rel_error: rel,
                worst_coordinate: i,
            };
        }
    }
    Ok(worst)
}

/// Grid of `(k, α, β)` for the moment checks.
pub fn default_moment_grid() -> Vec<(f64, f64, f64)> {
    let mut g = Vec::new();
    for k in [1.0, 1.2, 1.254, 1.6, 2.0] {
        for alpha in [2.2, 3.0, 6.0] {
            for beta in [0.5, 2.0] {
                g.push((k, alpha, beta));
            }
        }
    }
    g
}

/// 3⁴ grid of `(y, k, α, β)` for the quadrature checks.
pub fn default_quadrature_grid() -> Vec<(f64, f64, f64, f64)> {
    let mut g = Vec::new();
    for y in [0.05, 0.7, 4.0] {
        for k in [0.8, 1.254, 2.5] {
            for alpha in [2.2, 3.5, 12.0] {
                for beta in [0.1, 1.0, 9.0] {
                    g.push((y, k, alpha, beta));
                }
            }
        }
    }
    g
}

#[derive(Debug, Clone)]
pub struct ValidationSummary {
    pub moments: Vec<McMomentReport>,
    pub quadrature: Vec<QuadratureCheck>,
}

impl ValidationSummary {
    pub fn passed(&self) -> usize {
        self.moments.iter().filter(|m| m.passed()).count()
            + self.quadrature.iter().filter(|q| q.pass).count()
    }

    pub fn total(&self) -> usize {
        self.moments.len() + self.quadrature.len()
    }

    pub fn all_passed(&self) -> bool {
        self.passed() == self.total()
    }

    pub fn write_csv(&self, moments_path: impl AsRef<Path>, quadrature_path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(moments_path)?;
        for m in &self.moments {
            w.serialize(m)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(quadrature_path)?;
        for q in &self.quadrature {
            w.serialize(q)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs moment checks on `moment_grid` (seeded per point) and quadrature checks on `quad_grid`.
pub fn run_validation(
    moment_grid: &[(f64, f64, f64)],
    quad_grid: &[(f64, f64, f64, f64)],
    n: usize,
    seed: u64,
) -> Result<ValidationSummary> {
    let mut moments = Vec::with_capacity(moment_grid.len());
    for (i, &(k, a, b)) in moment_grid.iter().enumerate() {
        let ev = EvidentialParams::relaxed(a, b)?;
        moments.push(validate_moments(&ev, k, n, seed.wrapping_add(i as u64))?);
    }
    let mut quadrature = Vec::with_capacity(quad_grid.len());
    for &(y, k, a, b) in quad_grid {
        quadrature.push(check_marginal(y, k, &EvidentialParams::relaxed(a, b)?, 1e-8)?);
    }
    Ok(ValidationSummary { moments, quadrature })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(a: f64, b: f64) -> EvidentialParams {
        EvidentialParams::relaxed(a, b).unwrap()
    }

    #[test]
    fn quadrature_lomax_point() {
        let q = quadrature_marginal(1.0, 1.0, &ev(1.0, 1.0)).unwrap();
        assert!((q - 0.25).abs() < 1e-8);
    }

    #[test]
    fn quadrature_matches_closed_form_example() {
        let e = ev(3.2, 0.9);
        let c = check_marginal(0.7, 1.254, &e, 1e-8).unwrap();
        assert!(c.pass, "{c:?}");
    }

    #[test]
    fn chain_mean_exponential_case() {
        let ys = sample_predictive(&ev(3.0, 4.0), 1.0, 1_000_000, 1);
        let m = sample_moments(&ys);
        assert!((m.mean - 2.0).abs() < 3.0 * m.mean_std_error, "{m:?}");
    }

    #[test]
    fn chain_scale_mean() {
        let ls = sample_scale(&ev(3.0, 1.0), 2.0, 1_000_000, 2);
        let m = ls.iter().sum::<f64>() / ls.len() as f64;
        // Γ(2.5) / Γ(3) from mpmath
        assert!((m / 0.664_670_194_089_568_5 - 1.0).abs() < 0.01);
    }

    #[test]
    fn chain_is_reproducible() {
        let e = ev(2.5, 0.3);
        assert_eq!(sample_predictive(&e, 1.3, 100, 5), sample_predictive(&e, 1.3, 100, 5));
    }

    #[test]
    fn moment_report_passes() {
        let r = validate_moments(&ev(3.0, 2.0), 1.2, 1_000_000, 3).unwrap();
        assert!(r.mean_pass, "{r:?}");
        let r = validate_moments(&ev(4.0, 2.0), 1.0, 1_000_000, 4).unwrap();
        assert!((r.analytic_variance - 4.0 / 18.0).abs() < 1e-14);
        assert!(r.variance_rel_error() < 0.03, "{r:?}");
    }

    #[test]
    fn moment_report_preconditions() {
        assert!(validate_moments(&ev(3.0, 2.0), 1.2, 1_000, 3).is_err());
        let r = validate_moments(&ev(2.05, 1.0), 1.0, 20_000, 1).unwrap();
        assert!(r.variance_pass.is_none() && !r.note.is_empty());
        let r = validate_moments(&ev(1.9, 1.0), 1.0, 20_000, 1).unwrap();
        assert_eq!(r.variance_pass, Some(false));
        assert!(r.note.contains("inconsistent"));
    }

    #[test]
    fn grad_check_basics() {
        let g = grad_check(|x| x[0] * x[0], &[6.0], &[3.0], 1e-5).unwrap();
        assert!(g.max_rel_error < 1e-10);
        let bad = grad_check(|x| if x[1] > 1.0 { f64::NAN } else { x[0] }, &[1.0, 0.0], &[0.0, 1.0], 1e-3);
        assert!(matches!(bad, Err(Error::Probe { coordinate: 1 })));
    }
}
