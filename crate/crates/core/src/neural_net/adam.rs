use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment accumulators, one pair per weight matrix and bias.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        let m_w: Vec<_> = net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect();
        let m_b: Vec<_> = net.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect();
        Self {
            config,
            step: 0,
            v_w: m_w.clone(),
            v_b: m_b.clone(),
            m_w,
            m_b,
        }
    }

    /// One bias-corrected Adam update of every parameter in `net`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != net.layers.len() || self.m_w.len() != net.layers.len() {
            return Err(Error::Shape(format!(
                "Adam step with {} gradient layers, {} state layers, {} network layers",
                grads.layers.len(),
                self.m_w.len(),
                net.layers.len()
            )));
        }
        for (i, (layer, g)) in net.layers.iter().zip(&grads.layers).enumerate() {
            if layer.weights.dim() != g.weights.dim()
                || layer.bias.len() != g.bias.len()
                || self.m_w[i].dim() != g.weights.dim()
            {
                return Err(Error::Shape(format!("Adam step: layer {i} shape mismatch")));
            }
        }
        self.step += 1;
        let AdamConfig { learning_rate, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let step_size = learning_rate / (1.0 - beta1.powi(t));
        let v_corr = 1.0 / (1.0 - beta2.powi(t));

        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: &f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= step_size * *m / ((*v * v_corr).sqrt() + eps);
        };
        for (i, (layer, g)) in net.layers.iter_mut().zip(&grads.layers).enumerate() {
            Zip::from(&mut layer.weights)
                .and(&mut self.m_w[i])
                .and(&mut self.v_w[i])
                .and(&g.weights)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&mut self.m_b[i])
                .and(&mut self.v_b[i])
                .and(&g.bias)
                .for_each(update);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural_net::{Architecture, HeadKind};

    fn net() -> Mlp {
        Mlp::build(&Architecture::Widths(vec![3]), 2, HeadKind::WeibullGamma, 4).unwrap()
    }

    fn filled(net: &Mlp, value: f64) -> Gradients {
        let mut g = Gradients::zeros_like(net);
        for l in &mut g.layers {
            l.weights.fill(value);
            l.bias.fill(value);
        }
        g
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut n = net();
        let before = n.clone();
        let mut adam = AdamState::new(&n, AdamConfig { learning_rate: 0.01, ..Default::default() });
        let g = filled(&n, 1.0);
        adam.step(&mut n, &g).unwrap();
        for (a, b) in n.layers.iter().zip(&before.layers) {
            for (x, y) in a.weights.iter().zip(b.weights.iter()) {
                assert!(((y - x) - 0.01).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut n = net();
        let before = n.clone();
        let mut adam = AdamState::new(&n, AdamConfig::default());
        let g = Gradients::zeros_like(&n);
        adam.step(&mut n, &g).unwrap();
        assert_eq!(n, before);
    }

    #[test]
    fn deterministic_updates() {
        let run = || {
            let mut n = net();
            let mut adam = AdamState::new(&n, AdamConfig::default());
            for s in 0..5 {
                let g = filled(&n, 0.1 * s as f64 - 0.2);
                adam.step(&mut n, &g).unwrap();
            }
            n
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut n = net();
        let other = Mlp::build(&Architecture::Widths(vec![4]), 2, HeadKind::WeibullGamma, 4).unwrap();
        let mut adam = AdamState::new(&n, AdamConfig::default());
        assert!(adam.step(&mut n, &Gradients::zeros_like(&other)).is_err());
    }
}
