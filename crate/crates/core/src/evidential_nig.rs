//! Normal-Inverse-Gamma evidential regression, used as the benchmark head.
//!
//! `μ ~ N(γ, σ²/ν)`, `σ² ~ Γ⁻¹(α, β)`; the marginal of a target is a
//! Student-t with `2α` degrees of freedom, location `γ` and squared scale
//! `β(1+ν)/(να)`.

use serde::{Deserialize, Serialize};

use crate::distributions::{digamma_unchecked, ln_gamma};
use crate::error::{domain, Result};
use crate::evidential_weibull::PredictiveSummary;

const HALF_LN_PI: f64 = 0.572_364_942_924_700_1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    pub gamma: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl NigParams {
    pub fn new(gamma: f64, nu: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !gamma.is_finite() {
            return domain(format!("NIG location must be finite, got {gamma}"));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return domain(format!("NIG nu must be finite and > 0, got {nu}"));
        }
        if !(alpha > 1.0 && alpha.is_finite()) {
            return domain(format!("NIG alpha must be finite and > 1, got {alpha}"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return domain(format!("NIG beta must be finite and > 0, got {beta}"));
        }
        Ok(Self { gamma, nu, alpha, beta })
    }
}

/// Negative log of the Student-t marginal.
///
/// `½ ln(π/ν) − α ln Ω + (α+½) ln(ν(y−γ)² + Ω) + ln Γ(α) − ln Γ(α+½)`,
/// `Ω = 2β(1+ν)`.
pub fn nig_nll(y: f64, p: &NigParams) -> f64 {
    let omega = 2.0 * p.beta * (1.0 + p.nu);
    let r = y - p.gamma;
    HALF_LN_PI - 0.5 * p.nu.ln() - p.alpha * omega.ln()
        + (p.alpha + 0.5) * (p.nu * r * r + omega).ln()
        + ln_gamma(p.alpha)
        - ln_gamma(p.alpha + 0.5)
}

/// Evidence regulariser `|y − γ| (2ν + α)`.
pub fn nig_reg(y: f64, p: &NigParams) -> f64 {
    (y - p.gamma).abs() * (2.0 * p.nu + p.alpha)
}

/// Mean `γ`; variance carries the epistemic term `β / (ν(α−1))`.
pub fn nig_predict(p: &NigParams) -> PredictiveSummary {
    let variance = if p.alpha <= 1.0 {
        f64::INFINITY
    } else {
        p.beta / (p.nu * (p.alpha - 1.0))
    };
    PredictiveSummary {
        mean: p.gamma,
        variance,
        second_moment: variance + p.gamma * p.gamma,
    }
}

/// Aleatoric term `β / (α − 1)`.
pub fn nig_aleatoric(p: &NigParams) -> f64 {
    if p.alpha <= 1.0 {
        f64::INFINITY
    } else {
        p.beta / (p.alpha - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NigGradients {
    pub loss: f64,
    pub d_gamma: f64,
    pub d_nu: f64,
    pub d_alpha: f64,
    pub d_beta: f64,
}

impl NigGradients {
    pub fn as_array(&self) -> [f64; 4] {
        [self.d_gamma, self.d_nu, self.d_alpha, self.d_beta]
    }
}

/// Gradient of `nig_nll + c · nig_reg` with respect to `(γ, ν, α, β)`.
pub fn nig_loss_gradients(y: f64, p: &NigParams, c: f64) -> NigGradients {
    let (g, nu, a, b) = (p.gamma, p.nu, p.alpha, p.beta);
    let omega = 2.0 * b * (1.0 + nu);
    let r = y - g;
    let denom = nu * r * r + omega;
    let ah = a + 0.5;

    let d_gamma = -ah * 2.0 * nu * r / denom;
    let d_nu = -0.5 / nu - a * 2.0 * b / omega + ah * (r * r + 2.0 * b) / denom;
    let d_alpha = -omega.ln() + denom.ln() + digamma_unchecked(a) - digamma_unchecked(ah);
    let d_beta = -a / b + ah * 2.0 * (1.0 + nu) / denom;

    let sign = if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    };
    let abs_r = r.abs();
    NigGradients {
        loss: nig_nll(y, p) + c * nig_reg(y, p),
        d_gamma: d_gamma - c * sign * (2.0 * nu + a),
        d_nu: d_nu + c * 2.0 * abs_r,
        d_alpha: d_alpha + c * abs_r,
        d_beta,
    }
}
