//! Closed-form quantities for the Weibull likelihood with known shape `k` and
//! an inverse-gamma prior on `θ = λᵏ`.
//!
//! Given evidential parameters `(α, β)` the marginal density of a target is
//! `α k y^{k−1} β^α / (yᵏ + β)^{α+1}`, the mean prediction is
//! `Z = Γ(1+1/k) Γ(α−1/k) β^{1/k} / Γ(α)` and the total predictive
//! uncertainty is `Var(Z) = Γ²(1+1/k) (E[λ²] − E[λ]²)`.
//! All gamma-function ratios are evaluated in log space.

use serde::{Deserialize, Serialize};

use crate::distributions::{digamma_unchecked, ln_gamma, InvGammaParams};
use crate::error::{domain, Error, Result};

/// Parameters `(α, β)` of the inverse-gamma prior over `θ = λᵏ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidentialParams {
    pub alpha: f64,
    pub beta: f64,
}

impl EvidentialParams {
    /// Validated constructor; requires `α > 2`, `β > 0`.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 2.0 && alpha.is_finite()) {
            return domain(format!("evidential alpha must be finite and > 2, got {alpha}"));
        }
        Self::relaxed(alpha, beta)
    }

    /// Only requires `α > 0`; for evaluating densities on reference cases
    /// such as the `α = 1` Lomax reduction.
    pub fn relaxed(alpha: f64, beta: f64) -> Result<Self> {
        InvGammaParams::new(alpha, beta)?;
        Ok(Self { alpha, beta })
    }

    pub fn prior(&self) -> InvGammaParams {
        InvGammaParams {
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

/// Mean prediction and its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    pub mean: f64,
    /// May be `+∞` when the second moment does not exist.
    pub variance: f64,
    pub second_moment: f64,
}

impl PredictiveSummary {
    pub fn has_infinite_variance(&self) -> bool {
        self.variance.is_infinite()
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

fn check_shape(k: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return domain(format!("Weibull shape must be finite and > 0, got {k}"));
    }
    Ok(())
}

/// `(k − 1) ln y`, with the `y = 0` boundary resolved per the value of `k`.
fn ln_y_power(y: f64, k: f64) -> Result<f64> {
    if y < 0.0 || y.is_nan() {
        return domain(format!("target must be non-negative, got {y}"));
    }
    if y == 0.0 {
        return if k < 1.0 {
            Err(Error::Singularity(format!(
                "density is unbounded at y = 0 for k = {k} < 1"
            )))
        } else if k == 1.0 {
            Ok(0.0)
        } else {
            Ok(f64::NEG_INFINITY)
        };
    }
    Ok((k - 1.0) * y.ln())
}

/// `ln(yᵏ + β)`.
fn ln_yk_plus_beta(y: f64, k: f64, beta: f64) -> f64 {
    beta.ln() + (y.powf(k) / beta).ln_1p()
}

/// Log of the marginal density `∫ p(y | θ, k) p(θ | α, β) dθ`.
pub fn ln_marginal_likelihood(y: f64, k: f64, ev: &EvidentialParams) -> Result<f64> {
    check_shape(k)?;
    let ly = ln_y_power(y, k)?;
    let (a, b) = (ev.alpha, ev.beta);
    Ok(a.ln() + k.ln() + ly + a * b.ln() - (a + 1.0) * ln_yk_plus_beta(y, k, b))
}

/// `α k y^{k−1} β^α / (yᵏ + β)^{α+1}`.
pub fn marginal_likelihood(y: f64, k: f64, ev: &EvidentialParams) -> Result<f64> {
    ln_marginal_likelihood(y, k, ev).map(f64::exp)
}

/// Negative log marginal likelihood of one observation.
///
/// `−[ln α + ln k + (k−1) ln y + α ln β − (α+1) ln(yᵏ + β)]`
pub fn nll(y: f64, k: f64, ev: &EvidentialParams) -> Result<f64> {
    ln_marginal_likelihood(y, k, ev).map(|l| -l)
}

/// Log of `E[λ^m] / β^{m/k}` i.e. `ln Γ(α − m/k) − ln Γ(α)`.
fn ln_lambda_moment_ratio(m: f64, k: f64, alpha: f64) -> f64 {
    ln_gamma(alpha - m / k) - ln_gamma(alpha)
}

/// Mean prediction `Z = E[y | α, β]`.
pub fn mean_prediction(k: f64, ev: &EvidentialParams) -> Result<f64> {
    check_shape(k)?;
    if ev.alpha <= 1.0 / k {
        return Err(Error::UndefinedMoment(format!(
            "mean requires alpha > 1/k, got alpha = {} with k = {k}",
            ev.alpha
        )));
    }
    let ln_z = ln_gamma(1.0 + 1.0 / k) + ln_lambda_moment_ratio(1.0, k, ev.alpha) + ev.beta.ln() / k;
    Ok(ln_z.exp())
}

/// Mean, variance and second moment of `Z = λ Γ(1 + 1/k)`.
///
/// Variance is `+∞` when `1/k < α ≤ 2/k`.
pub fn predict(k: f64, ev: &EvidentialParams) -> Result<PredictiveSummary> {
    let mean = mean_prediction(k, ev)?;
    if ev.alpha <= 2.0 / k {
        return Ok(PredictiveSummary {
            mean,
            variance: f64::INFINITY,
            second_moment: f64::INFINITY,
        });
    }
    // Var / Z² = Γ(α−2/k) Γ(α) / Γ(α−1/k)² − 1, kept accurate for large α.
    let ln_ratio = ln_gamma(ev.alpha - 2.0 / k) + ln_gamma(ev.alpha)
        - 2.0 * ln_gamma(ev.alpha - 1.0 / k);
    let variance = mean * mean * ln_ratio.exp_m1();
    Ok(PredictiveSummary {
        mean,
        variance,
        second_moment: mean * mean * ln_ratio.exp(),
    })
}

/// `Var(Z)`; `+∞` inside the moment-existence gap `1/k < α ≤ 2/k`.
pub fn predictive_variance(k: f64, ev: &EvidentialParams) -> Result<f64> {
    predict(k, ev).map(|s| s.variance)
}

/// `|y − z| · α / β`.
pub fn reg_loss(y: f64, z: f64, ev: &EvidentialParams) -> f64 {
    (y - z).abs() * ev.alpha / ev.beta
}

/// Batch mean of `nll + c · reg_loss`.
pub fn total_loss(batch: &[(f64, EvidentialParams)], k: f64, c: f64) -> Result<f64> {
    if batch.is_empty() {
        return domain("total loss of an empty batch");
    }
    if !(c >= 0.0) {
        return domain(format!("regularisation coefficient must be >= 0, got {c}"));
    }
    let mut sum = 0.0;
    for (y, ev) in batch {
        let z = mean_prediction(k, ev)?;
        sum += nll(*y, k, ev)? + c * reg_loss(*y, z, ev);
    }
    Ok(sum / batch.len() as f64)
}

/// Single-point loss and its gradient with respect to `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossGradients {
    pub loss: f64,
    pub d_alpha: f64,
    pub d_beta: f64,
}

/// Gradient of `nll + c · reg_loss` for one observation.
///
/// The regulariser is differentiated through `Z` as well as through `α/β`;
/// at `y = Z` the subgradient zero is taken for `|y − Z|`.
pub fn loss_gradients(y: f64, k: f64, ev: &EvidentialParams, c: f64) -> Result<LossGradients> {
    let nll = nll(y, k, ev)?;
    let (a, b) = (ev.alpha, ev.beta);
    let yk = y.powf(k);
    let ln_s = ln_yk_plus_beta(y, k, b);

    let d_nll_a = -1.0 / a - b.ln() + ln_s;
    let d_nll_b = -a / b + (a + 1.0) / (yk + b);
    if c == 0.0 {
        // The NLL alone is defined for any alpha > 0; the mean is not.
        return Ok(LossGradients {
            loss: nll,
            d_alpha: d_nll_a,
            d_beta: d_nll_b,
        });
    }

    let z = mean_prediction(k, ev)?;

    let dz_a = z * (digamma_unchecked(a - 1.0 / k) - digamma_unchecked(a));
    let dz_b = z / (k * b);
    let err = y - z;
    let sign = if err > 0.0 {
        1.0
    } else if err < 0.0 {
        -1.0
    } else {
        0.0
    };
    let ratio = a / b;
    let d_reg_a = -sign * dz_a * ratio + err.abs() / b;
    let d_reg_b = -sign * dz_b * ratio - err.abs() * ratio / b;

    Ok(LossGradients {
        loss: nll + c * err.abs() * ratio,
        d_alpha: d_nll_a + c * d_reg_a,
        d_beta: d_nll_b + c * d_reg_b,
    })
}
