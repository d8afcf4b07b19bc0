//! Maps raw network outputs onto valid evidential parameters.

use crate::evidential_nig::NigParams;
use crate::evidential_weibull::EvidentialParams;

pub const MIN_SCALE: f64 = 1e-6;

/// `ln(1 + eˣ)` without overflow for large `x` or precision loss for very negative `x`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of [`softplus`].
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `α = 2 + softplus(r₀)`, `β = softplus(r₁) + 1e-6`.
pub fn weibull_gamma_head(raw: [f64; 2]) -> EvidentialParams {
    EvidentialParams {
        alpha: 2.0 + softplus(raw[0]),
        beta: softplus(raw[1]) + MIN_SCALE,
    }
}

/// `γ = r₀`, `ν = softplus(r₁) + 1e-6`, `α = 1 + softplus(r₂)`, `β = softplus(r₃) + 1e-6`.
pub fn normal_gamma_head(raw: [f64; 4]) -> NigParams {
    NigParams {
        gamma: raw[0],
        nu: softplus(raw[1]) + MIN_SCALE,
        alpha: 1.0 + softplus(raw[2]),
        beta: softplus(raw[3]) + MIN_SCALE,
    }
}

/// Chains `(∂L/∂α, ∂L/∂β)` back to the raw outputs.
pub fn weibull_gamma_head_backward(raw: [f64; 2], grad: [f64; 2]) -> [f64; 2] {
    [grad[0] * sigmoid(raw[0]), grad[1] * sigmoid(raw[1])]
}

/// Chains `(∂L/∂γ, ∂L/∂ν, ∂L/∂α, ∂L/∂β)` back to the raw outputs.
pub fn normal_gamma_head_backward(raw: [f64; 4], grad: [f64; 4]) -> [f64; 4] {
    [
        grad[0],
        grad[1] * sigmoid(raw[1]),
        grad[2] * sigmoid(raw[2]),
        grad[3] * sigmoid(raw[3]),
    ]
}
