//! Dense feed-forward network with hand-written backpropagation.
//!
//! Weights are stored `out × in`; a batch is an `n × in` matrix, so a layer
//! computes `Z = X Wᵀ + b`. The final layer is linear and has as many outputs
//! as the evidential head needs (2 for Weibull-gamma, 4 for normal-gamma).

mod adam;
pub mod checkpoint;
pub mod head;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{AdamConfig, AdamState};
pub use head::{normal_gamma_head, softplus, weibull_gamma_head};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeadKind {
    /// Inverse-gamma prior over the Weibull `λᵏ`; outputs `(α, β)`.
    #[serde(rename = "weibull")]
    WeibullGamma,
    /// Normal-inverse-gamma benchmark; outputs `(γ, ν, α, β)`.
    #[serde(rename = "nig")]
    NormalGamma,
}

impl HeadKind {
    pub fn raw_width(self) -> usize {
        match self {
            HeadKind::WeibullGamma => 2,
            HeadKind::NormalGamma => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::WeibullGamma => "weibull",
            HeadKind::NormalGamma => "nig",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "weibull" | "weibull-gamma" | "proposed" => Ok(HeadKind::WeibullGamma),
            "nig" | "normal-gamma" | "benchmark" => Ok(HeadKind::NormalGamma),
            other => Err(Error::Config(format!(
                "unknown head '{other}', expected 'weibull' or 'nig'"
            ))),
        }
    }
}

/// Hidden-layer layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Architecture {
    /// Five ReLU layers of 200 units.
    Synthetic,
    /// `[first, 350, 300, 300, 250, 250, 200, 200, 200]`; `first` defaults to
    /// the width-1 bottleneck of the reference model.
    Recovery { first: usize },
    Widths(Vec<usize>),
}

impl Architecture {
    pub const RECOVERY_TAIL: [usize; 8] = [350, 300, 300, 250, 250, 200, 200, 200];

    pub fn recovery() -> Self {
        Architecture::Recovery { first: 1 }
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        match self {
            Architecture::Synthetic => vec![200; 5],
            Architecture::Recovery { first } => {
                let mut w = vec![*first];
                w.extend_from_slice(&Self::RECOVERY_TAIL);
                w
            }
            Architecture::Widths(w) => w.clone(),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Architecture::Synthetic => f.write_str("synthetic"),
            Architecture::Recovery { first: 1 } => f.write_str("recovery"),
            Architecture::Recovery { first } => write!(f, "recovery:{first}"),
            Architecture::Widths(w) => {
                let parts: Vec<String> = w.iter().map(|x| x.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl FromStr for Architecture {
    type Err = Error;

    /// `synthetic`, `recovery`, `recovery:<first width>` or a comma-separated width list.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "synthetic" => return Ok(Architecture::Synthetic),
            "recovery" => return Ok(Architecture::recovery()),
            _ => {}
        }
        if let Some(first) = s.strip_prefix("recovery:") {
            let first = first
                .parse::<usize>()
                .ok()
                .filter(|w| *w > 0)
                .ok_or_else(|| Error::Config(format!("bad recovery width in '{s}'")))?;
            return Ok(Architecture::Recovery { first });
        }
        let widths: std::result::Result<Vec<usize>, _> =
            s.split(',').map(|p| p.trim().parse::<usize>()).collect();
        match widths {
            Ok(w) if !w.is_empty() && w.iter().all(|x| *x > 0) => Ok(Architecture::Widths(w)),
            _ => Err(Error::Config(format!(
                "unknown architecture '{s}', expected 'synthetic', 'recovery' or a width list like '64,64'"
            ))),
        }
    }
}

impl TryFrom<String> for Architecture {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Architecture> for String {
    fn from(a: Architecture) -> String {
        a.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
    pub head: HeadKind,
    pub input_dim: usize,
}

/// Activations retained by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[i]` is the input to layer `i`; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    /// Raw head inputs, `n × head width`.
    pub output: Array2<f64>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weights.iter().chain(l.bias.iter()).map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|g| g.is_finite()))
    }

    /// Rescales so the global norm is at most `max_norm`; returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm {
            let s = max_norm / norm;
            for l in &mut self.layers {
                l.weights.mapv_inplace(|g| g * s);
                l.bias.mapv_inplace(|g| g * s);
            }
        }
        norm
    }
}

impl Mlp {
    /// He-normal weights, zero biases, ReLU hidden layers, linear output
    /// sized for `head`.
    pub fn build(arch: &Architecture, input_dim: usize, head: HeadKind, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        let hidden = arch.hidden_widths();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = input_dim;
        let widths = hidden
            .iter()
            .map(|w| (*w, Activation::Relu))
            .chain(std::iter::once((head.raw_width(), Activation::Linear)));
        for (out, activation) in widths {
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            let weights = Array2::from_shape_fn((out, fan_in), |_| normal.sample(&mut rng));
            layers.push(DenseLayer {
                weights,
                bias: Array1::zeros(out),
                activation,
            });
            fan_in = out;
        }
        Ok(Self {
            layers,
            head,
            input_dim,
        })
    }

    pub fn from_layers(layers: Vec<DenseLayer>, head: HeadKind) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Shape("network needs at least one layer".into()))?;
        let input_dim = first.in_dim();
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::Shape(format!("layer {i} bias length mismatch")));
            }
            if !l.weights.iter().chain(l.bias.iter()).all(|w| w.is_finite()) {
                return Err(Error::Shape(format!("layer {i} has non-finite parameters")));
            }
        }
        let last = layers.last().expect("non-empty").out_dim();
        if last != head.raw_width() {
            return Err(Error::Shape(format!(
                "head '{head}' needs {} raw outputs, last layer has {last}",
                head.raw_width()
            )));
        }
        Ok(Self {
            layers,
            head,
            input_dim,
        })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(DenseLayer::out_dim)
            .collect()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        if x.ncols() != self.input_dim {
            return Err(Error::Shape(format!(
                "network expects {} features, batch has {}",
                self.input_dim,
                x.ncols()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = x.to_owned();
        for layer in &self.layers {
            let mut z = current.dot(&layer.weights.t());
            z += &layer.bias;
            if layer.activation == Activation::Relu {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(std::mem::replace(&mut current, z));
        }
        Ok(ForwardCache {
            inputs,
            output: current,
        })
    }

    /// Raw head inputs only.
    pub fn predict_raw(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.forward(x).map(|c| c.output)
    }

    /// Backpropagates `d_output` (gradient of the loss with respect to the
    /// raw outputs, already scaled for batch averaging) to every parameter.
    pub fn backward(&self, cache: &ForwardCache, d_output: ArrayView2<f64>) -> Result<Gradients> {
        if cache.inputs.len() != self.layers.len() || d_output.dim() != cache.output.dim() {
            return Err(Error::Shape(
                "forward cache does not match this network or upstream gradient".into(),
            ));
        }
        for (layer, input) in self.layers.iter().zip(&cache.inputs) {
            if input.ncols() != layer.in_dim() {
                return Err(Error::Shape("stale forward cache".into()));
            }
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_output.to_owned();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if layer.activation == Activation::Relu {
                // The layer output is the next layer's input (or the cache output).
                let out = if i + 1 < self.layers.len() {
                    &cache.inputs[i + 1]
                } else {
                    &cache.output
                };
                ndarray::Zip::from(&mut delta)
                    .and(out)
                    .for_each(|d, &a| {
                        if a <= 0.0 {
                            *d = 0.0
                        }
                    });
            }
            let input = &cache.inputs[i];
            let d_w = delta.t().dot(input);
            let d_b = delta.sum_axis(Axis(0));
            if i > 0 {
                delta = delta.dot(&layer.weights);
            }
            grads.push(LayerGradients {
                weights: d_w,
                bias: d_b,
            });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }
}

/// Builds a freshly initialised network for a named layout.
pub fn build_architecture(
    arch: &Architecture,
    input_dim: usize,
    head: HeadKind,
    seed: u64,
) -> Result<Mlp> {
    Mlp::build(arch, input_dim, head, seed)
}
