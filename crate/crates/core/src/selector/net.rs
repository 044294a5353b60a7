//! Fully-connected selector network: ReLU hidden layers, sigmoid outputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::loss::sigmoid;

/// One dense layer. `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], biases: vec![0.0; outputs] }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.biases[o]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorNet {
    layers: Vec<Layer>,
}

/// Per-layer inputs and pre-activations kept for back-propagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn logits(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }

    /// Pre-activations of every layer, the last being the logits.
    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }
}

impl SelectorNet {
    fn check_dims(layer_dims: &[usize]) -> Result<()> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::input(format!("invalid layer dims {layer_dims:?}")));
        }
        Ok(())
    }

    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        Self::check_dims(layer_dims)?;
        Ok(Self { layers: layer_dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect() })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(layer_dims: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(layer_dims)?;
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::input("network needs at least one layer"));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.inputs == 0 || l.outputs == 0 || l.weights.len() != l.inputs * l.outputs || l.biases.len() != l.outputs {
                return Err(Error::input(format!("layer {k} has inconsistent shapes")));
            }
            if k > 0 && layers[k - 1].outputs != l.inputs {
                return Err(Error::input(format!("layer {k} input {} != previous output {}", l.inputs, layers[k - 1].outputs)));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs).chain(self.layers.iter().map(|l| l.outputs)).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::input(format!("expected {} features, got {}", self.input_dim(), x.len())));
        }
        Ok(())
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut cache = ForwardCache { inputs: Vec::with_capacity(self.layers.len()), pre: Vec::with_capacity(self.layers.len()) };
        let mut a = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.apply(&a);
            let next = if k == last { z.clone() } else { z.iter().map(|v| v.max(0.0)).collect() };
            cache.inputs.push(std::mem::replace(&mut a, next));
            cache.pre.push(z);
        }
        Ok(cache)
    }

    /// Pre-sigmoid output scores.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.pre.pop().unwrap())
    }

    /// Per-model selection probabilities, each in (0, 1).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.logits(x)?.into_iter().map(sigmoid).collect())
    }

    /// Accumulates `scale * dL/dparam` into `grad` given `dL/dlogits`.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[f64], scale: f64, grad: &mut SelectorNet) {
        let mut delta = dlogits.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let g = &mut grad.layers[k];
            let input = &cache.inputs[k];
            for o in 0..layer.outputs {
                let d = delta[o] * scale;
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, a) in row.iter_mut().zip(input) {
                    *gw += d * a;
                }
            }
            if k == 0 {
                break;
            }
            let prev_pre = &cache.pre[k - 1];
            delta = (0..layer.inputs)
                .map(|i| {
                    if prev_pre[i] <= 0.0 {
                        return 0.0;
                    }
                    (0..layer.outputs).map(|o| layer.weights[o * layer.inputs + i] * delta[o]).sum()
                })
                .collect();
        }
    }

    pub fn zeros_like(&self) -> SelectorNet {
        SelectorNet { layers: self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect() }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Picks the model with the highest score. Ranking uses the logits, which
/// orders models exactly as the sigmoid outputs do but without saturation.
pub fn select(net: &SelectorNet, x: &[f64]) -> Result<usize> {
    Ok(argmax(&net.logits(x)?))
}
