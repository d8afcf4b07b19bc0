//! JSON checkpoints. Floats round-trip bit-exactly (`serde_json/float_roundtrip`).

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, HeadKind, Mlp};
use crate::datasets::Standardizer;
use crate::error::{Error, Result};

pub const FORMAT: &str = "deep-evidence-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out × in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub head: HeadKind,
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub k_hat: Option<f64>,
    pub standardization: Option<Standardizer>,
    pub layers: Vec<LayerRecord>,
}

impl Checkpoint {
    pub fn from_parts(net: &Mlp, k_hat: Option<f64>, standardization: Option<&Standardizer>) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| LayerRecord {
                in_dim: l.in_dim(),
                out_dim: l.out_dim(),
                weights: l.weights.iter().copied().collect(),
                bias: l.bias.to_vec(),
                activation: l.activation,
            })
            .collect();
        Checkpoint {
            format: FORMAT.to_string(),
            version: VERSION,
            head: net.head,
            input_dim: net.input_dim,
            hidden_widths: net.hidden_widths(),
            k_hat,
            standardization: standardization.cloned(),
            layers,
        }
    }

    /// Rebuilds the network, checking the header and every recorded shape.
    pub fn into_parts(self) -> Result<(Mlp, Option<f64>, Option<Standardizer>)> {
        if self.format != FORMAT {
            return Err(Error::Schema(format!("not a checkpoint: format tag {:?}", self.format)));
        }
        if self.version != VERSION {
            return Err(Error::Schema(format!(
                "checkpoint version {} is not supported (expected {VERSION})",
                self.version
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, r) in self.layers.into_iter().enumerate() {
            let weights = Array2::from_shape_vec((r.out_dim, r.in_dim), r.weights)
                .map_err(|e| Error::Shape(format!("layer {i} weights: {e}")))?;
            if r.bias.len() != r.out_dim {
                return Err(Error::Shape(format!(
                    "layer {i} has {} biases for {} outputs",
                    r.bias.len(),
                    r.out_dim
                )));
            }
            layers.push(DenseLayer {
                weights,
                bias: Array1::from(r.bias),
                activation: r.activation,
            });
        }
        let net = Mlp::from_layers(layers, self.head)?;
        if net.input_dim != self.input_dim || net.hidden_widths() != self.hidden_widths {
            return Err(Error::Shape("checkpoint header disagrees with its layers".into()));
        }
        if let Some(s) = &self.standardization {
            if s.mean.len() != net.input_dim || s.std.len() != net.input_dim {
                return Err(Error::Shape("standardization width differs from input width".into()));
            }
        }
        Ok((net, self.k_hat, self.standardization))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
