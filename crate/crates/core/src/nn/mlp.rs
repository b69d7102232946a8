//! Dense feedforward network with two reverse passes.
//!
//! Each layer computes `a = act(W x + b)` with `W` stored row-major as
//! `(out_dim, in_dim)`. The forward pass returns a [`ForwardCache`] holding
//! every post-activation; both backward passes read only that cache, so a
//! frozen network can carry an error back to its inputs without touching its
//! parameters.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Half-width of the uniform weight initialisation range.
pub const DEFAULT_INIT_SCALE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the post-activation value.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    /// Row-major `(out_dim, in_dim)`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::shape("layer weights", in_dim * out_dim, weights.len()));
        }
        if biases.len() != out_dim {
            return Err(Error::shape("layer biases", out_dim, biases.len()));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::invalid("layer parameters must be finite"));
        }
        Ok(Self {
            in_dim,
            out_dim,
            activation,
            weights,
            biases,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.in_dim).zip(&self.biases) {
            let z = row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi);
            out.push(self.activation.apply(z));
        }
    }
}

/// Post-activations of every layer, `activations[0]` being the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache always holds the input")
    }

    pub fn activations(&self) -> &[Vec<f64>] {
        &self.activations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Gradients of a scalar loss with respect to every parameter and every input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
    pub input: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
            input: vec![0.0; net.input_dim()],
        }
    }

    /// Parameter gradients in the same order as [`Mlp::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.flatten().iter().all(|g| *g == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    /// Random network with weights uniform in `[-DEFAULT_INIT_SCALE, +DEFAULT_INIT_SCALE]`
    /// and zero biases.
    pub fn new(layer_dims: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        Self::with_init_scale(layer_dims, activations, seed, DEFAULT_INIT_SCALE)
    }

    pub fn with_init_scale(
        layer_dims: &[usize],
        activations: &[Activation],
        seed: u64,
        init_scale: f64,
    ) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::invalid("an mlp needs at least input and output dims"));
        }
        if activations.len() != layer_dims.len() - 1 {
            return Err(Error::shape(
                "activations per layer",
                layer_dims.len() - 1,
                activations.len(),
            ));
        }
        if !(init_scale.is_finite() && init_scale >= 0.0) {
            return Err(Error::invalid("init scale must be finite and non-negative"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_dims
            .windows(2)
            .zip(activations)
            .map(|(dims, &act)| {
                let (n_in, n_out) = (dims[0], dims[1]);
                let weights = if init_scale > 0.0 {
                    let dist = Uniform::new_inclusive(-init_scale, init_scale);
                    (0..n_in * n_out).map(|_| dist.sample(&mut rng)).collect()
                } else {
                    vec![0.0; n_in * n_out]
                };
                Layer::new(n_in, n_out, weights, vec![0.0; n_out], act)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    /// Tanh hidden layers followed by a linear head. An empty `hidden` gives a
    /// purely affine network.
    pub fn tanh_linear(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        seed: u64,
        init_scale: f64,
    ) -> Result<Self> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(hidden);
        dims.push(output_dim);
        let mut acts = vec![Activation::Tanh; hidden.len()];
        acts.push(Activation::Linear);
        Self::with_init_scale(&dims, &acts, seed, init_scale)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("an mlp needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::shape("layer chaining", pair[0].out_dim, pair[1].in_dim));
            }
        }
        Ok(Self { layers })
    }

    /// Single affine layer `y = w·x + b` with a linear activation.
    pub fn affine(weights: &[f64], bias: f64) -> Result<Self> {
        let layer = Layer::new(
            weights.len(),
            1,
            weights.to_vec(),
            vec![bias],
            Activation::Linear,
        )?;
        Self::from_layers(vec![layer])
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// All parameters, layer by layer, weights (row-major) then biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_parameters() {
            return Err(Error::shape("parameter vector", self.num_parameters(), params.len()));
        }
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = it.next().expect("length checked above");
            }
        }
        Ok(())
    }

    pub fn max_abs_parameter(&self) -> f64 {
        self.parameters().iter().fold(0.0, |m, p| m.max(p.abs()))
    }

    /// SHA-256 over the little-endian bytes of every parameter.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for p in self.parameters() {
            hasher.update(p.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if x.len() != self.input_dim() {
            return Err(Error::shape("mlp input", self.input_dim(), x.len()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mlp input must be finite"));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let mut out = Vec::with_capacity(layer.out_dim);
            layer.forward_into(activations.last().expect("non-empty"), &mut out);
            activations.push(out);
        }
        let y = activations.last().expect("non-empty").clone();
        Ok((y, ForwardCache { activations }))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x).map(|(y, _)| y)
    }

    /// Scalar-output convenience wrapper around [`Mlp::predict`].
    pub fn predict_scalar(&self, x: &[f64]) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(Error::shape("scalar mlp output", 1, self.output_dim()));
        }
        Ok(self.predict(x)?[0])
    }

    fn check_cache(&self, cache: &ForwardCache, dl_dy: &[f64]) -> Result<()> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::shape(
                "forward cache depth",
                self.layers.len() + 1,
                cache.activations.len(),
            ));
        }
        if cache.activations[0].len() != self.input_dim() {
            return Err(Error::shape("forward cache input", self.input_dim(), cache.activations[0].len()));
        }
        for (layer, a) in self.layers.iter().zip(&cache.activations[1..]) {
            if a.len() != layer.out_dim {
                return Err(Error::shape("forward cache layer", layer.out_dim, a.len()));
            }
        }
        if dl_dy.len() != self.output_dim() {
            return Err(Error::shape("output gradient", self.output_dim(), dl_dy.len()));
        }
        Ok(())
    }

    /// Shared reverse sweep. `on_layer` receives each layer index with its
    /// pre-activation delta and input activation.
    fn reverse_sweep(
        &self,
        cache: &ForwardCache,
        dl_dy: &[f64],
        mut on_layer: impl FnMut(usize, &[f64], &[f64]),
    ) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut delta: Vec<f64> = dl_dy
            .iter()
            .zip(&cache.activations[last + 1])
            .map(|(g, a)| g * self.layers[last].activation.derivative_from_output(*a))
            .collect();
        for idx in (0..self.layers.len()).rev() {
            let layer = &self.layers[idx];
            let input = &cache.activations[idx];
            on_layer(idx, &delta, input);
            let mut upstream = vec![0.0; layer.in_dim];
            for (row, d) in layer.weights.chunks_exact(layer.in_dim).zip(&delta) {
                for (u, w) in upstream.iter_mut().zip(row) {
                    *u += w * d;
                }
            }
            if idx > 0 {
                let act = self.layers[idx - 1].activation;
                for (u, a) in upstream.iter_mut().zip(input) {
                    *u *= act.derivative_from_output(*a);
                }
            }
            delta = upstream;
        }
        delta
    }

    /// Reverse-mode gradients of the loss with respect to every weight and
    /// bias, given `dL/dy`. The input gradient is filled in as well.
    pub fn backward_weights(&self, cache: &ForwardCache, dl_dy: &[f64]) -> Result<Gradients> {
        self.check_cache(cache, dl_dy)?;
        let mut grads = Gradients::zeros_like(self);
        let input = self.reverse_sweep(cache, dl_dy, |idx, delta, x| {
            let g = &mut grads.layers[idx];
            for (row, d) in g.weights.chunks_exact_mut(x.len()).zip(delta) {
                for (gw, xi) in row.iter_mut().zip(x) {
                    *gw = d * xi;
                }
            }
            g.biases.copy_from_slice(delta);
        });
        grads.input = input;
        Ok(grads)
    }

    /// Gradient of the loss with respect to the network inputs. Parameters
    /// are read, never written.
    pub fn backward_inputs(&self, cache: &ForwardCache, dl_dy: &[f64]) -> Result<Vec<f64>> {
        self.check_cache(cache, dl_dy)?;
        Ok(self.reverse_sweep(cache, dl_dy, |_, _, _| {}))
    }

    /// Plain steepest descent: `w <- w - rate * dL/dw` for every parameter.
    pub fn sgd_step(&mut self, grads: &Gradients, rate: f64) -> Result<()> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::invalid(format!("learning rate must be finite and >= 0, got {rate}")));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::shape("gradient layers", self.layers.len(), grads.layers.len()));
        }
        for (layer, g) in self.layers.iter().zip(&grads.layers) {
            if g.weights.len() != layer.weights.len() {
                return Err(Error::shape("gradient weights", layer.weights.len(), g.weights.len()));
            }
            if g.biases.len() != layer.biases.len() {
                return Err(Error::shape("gradient biases", layer.biases.len(), g.biases.len()));
            }
        }
        if rate == 0.0 {
            return Ok(());
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= rate * gw;
            }
            for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= rate * gb;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(w: f64, b: f64) -> Mlp {
        Mlp::affine(&[w], b).unwrap()
    }

    #[test]
    fn smallest_network_is_affine() {
        let net = Mlp::new(&[1, 1], &[Activation::Linear], 3).unwrap();
        let w = net.layers()[0].weight(0, 0);
        let y = net.predict_scalar(&[2.0]).unwrap();
        assert_eq!(y, 2.0 * w);
        assert!(w.abs() <= DEFAULT_INIT_SCALE);
    }

    #[test]
    fn construction_is_deterministic_per_seed() {
        let dims = [3, 8, 1];
        let acts = [Activation::Tanh, Activation::Linear];
        let a = Mlp::new(&dims, &acts, 42).unwrap();
        let b = Mlp::new(&dims, &acts, 42).unwrap();
        let c = Mlp::new(&dims, &acts, 43).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.parameters(), c.parameters());
        assert!(a.layers()[0].biases().iter().all(|b| *b == 0.0));
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let err = Mlp::new(&[2, 3], &[Activation::Tanh, Activation::Linear], 0);
        assert!(matches!(err, Err(Error::Shape { .. })));
    }

    #[test]
    fn forward_examples() {
        assert_eq!(scalar(1.0, 0.0).predict_scalar(&[0.7]).unwrap(), 0.7);
        assert_eq!(scalar(2.0, 0.5).predict_scalar(&[1.0]).unwrap(), 2.5);
        let zero = Mlp::with_init_scale(&[4, 5, 2], &[Activation::Tanh, Activation::Tanh], 1, 0.0).unwrap();
        assert_eq!(zero.predict(&[0.3, -1.0, 2.0, 9.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        assert!(scalar(1.0, 0.0).forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn affine_chain_rule() {
        let (w, x0, g) = (1.7, -0.4, 0.3);
        let net = scalar(w, 0.2);
        let (_, cache) = net.forward(&[x0]).unwrap();
        let grads = net.backward_weights(&cache, &[g]).unwrap();
        assert_eq!(grads.layers[0].weights, vec![g * x0]);
        assert_eq!(grads.layers[0].biases, vec![g]);
        assert_eq!(net.backward_inputs(&cache, &[g]).unwrap(), vec![g * w]);
    }

    #[test]
    fn zero_seed_gives_zero_gradients() {
        let net = Mlp::new(&[3, 4, 2], &[Activation::Tanh, Activation::Linear], 5).unwrap();
        let (_, cache) = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        assert!(net.backward_weights(&cache, &[0.0, 0.0]).unwrap().is_zero());
        assert_eq!(net.backward_inputs(&cache, &[0.0, 0.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn cache_mismatch_is_rejected() {
        let a = Mlp::new(&[2, 3, 1], &[Activation::Tanh, Activation::Linear], 0).unwrap();
        let b = Mlp::new(&[2, 1], &[Activation::Linear], 0).unwrap();
        let (_, cache) = b.forward(&[1.0, 1.0]).unwrap();
        assert!(a.backward_weights(&cache, &[1.0]).is_err());
        assert!(a.backward_inputs(&cache, &[1.0]).is_err());
        let (_, cache) = a.forward(&[1.0, 1.0]).unwrap();
        assert!(a.backward_weights(&cache, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn sgd_examples() {
        let mut net = scalar(1.0, 0.0);
        let mut grads = Gradients::zeros_like(&net);
        net.sgd_step(&grads, 0.1).unwrap();
        assert_eq!(net.parameters(), vec![1.0, 0.0]);

        grads.layers[0].weights[0] = 0.5;
        net.sgd_step(&grads, 0.1).unwrap();
        assert!((net.parameters()[0] - 0.95).abs() < 1e-15);

        // two steps of r differ from one step of 2r only through float rounding
        let mut twice = scalar(1.0, 0.0);
        twice.sgd_step(&grads, 0.1).unwrap();
        twice.sgd_step(&grads, 0.1).unwrap();
        let mut once = scalar(1.0, 0.0);
        once.sgd_step(&grads, 0.2).unwrap();
        assert!((twice.parameters()[0] - once.parameters()[0]).abs() < 1e-15);
        assert!((twice.parameters()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn sgd_rate_zero_is_identity() {
        let mut net = Mlp::new(&[2, 3, 1], &[Activation::Tanh, Activation::Linear], 9).unwrap();
        let before = net.clone();
        let (_, cache) = net.forward(&[0.5, -0.5]).unwrap();
        let grads = net.backward_weights(&cache, &[1.0]).unwrap();
        net.sgd_step(&grads, 0.0).unwrap();
        assert_eq!(net, before);
        assert!(net.sgd_step(&grads, -1.0).is_err());
    }

    #[test]
    fn parameter_roundtrip() {
        let mut net = Mlp::new(&[2, 3, 1], &[Activation::Tanh, Activation::Linear], 9).unwrap();
        let mut p = net.parameters();
        p[0] = 1.25;
        net.set_parameters(&p).unwrap();
        assert_eq!(net.layers()[0].weight(0, 0), 1.25);
        assert!(net.set_parameters(&p[1..]).is_err());
    }
}
