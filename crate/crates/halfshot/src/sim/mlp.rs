//! Multi-layer perceptron with rectified-linear hidden layers and a softmax
//! output, trained by mini-batch gradient descent (Adam) on cross-entropy
//! against encoded score targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Decoupled L2 decay on the weights (not biases). Keeps the network
    /// close to its prior on inputs the training corpus never covered,
    /// which matters when the corpus is small.
    pub weight_decay: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![128, 128],
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Layer {
    // row-major: weights[o * in_dim + i]
    weights: Vec<f64>,
    bias: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
}

impl Layer {
    fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Layer {
            weights: (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-limit..limit))
                .collect(),
            bias: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(z + self.bias[o]);
        }
    }
}

fn relu_inplace(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn softmax_inplace(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Gradients with the same shape as the network parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    pub fn new(input: usize, hidden: &[usize], output: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        let layers = dims
            .windows(2)
            .map(|d| Layer::new(d[0], d[1], &mut rng))
            .collect();
        Mlp { layers }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    /// Softmax output for one input.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&cur, &mut next);
            if i < last {
                relu_inplace(&mut next);
            }
            std::mem::swap(&mut cur, &mut next);
        }
        softmax_inplace(&mut cur);
        cur
    }

    /// Mean cross-entropy over the batch and its analytic gradient.
    pub fn loss_and_grad(&self, batch: &[(&[f64], &[f64])]) -> (f64, Gradients) {
        let mut grads = Gradients {
            weights: self.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        };
        let mut loss = 0.0;
        let last = self.layers.len() - 1;
        let scale = 1.0 / batch.len() as f64;
        for &(x, target) in batch {
            // forward, keeping every activation
            let mut acts: Vec<Vec<f64>> = vec![x.to_vec()];
            for (i, layer) in self.layers.iter().enumerate() {
                let mut z = Vec::new();
                layer.forward(acts.last().unwrap(), &mut z);
                if i < last {
                    relu_inplace(&mut z);
                }
                acts.push(z);
            }
            let mut probs = acts.last().unwrap().clone();
            softmax_inplace(&mut probs);
            for (p, t) in probs.iter().zip(target) {
                if *t > 0.0 {
                    loss -= t * p.max(1e-300).ln() * scale;
                }
            }
            // backward: delta at the softmax pre-activation is p - t
            let mut delta: Vec<f64> = probs.iter().zip(target).map(|(p, t)| (p - t) * scale).collect();
            for i in (0..self.layers.len()).rev() {
                let input = &acts[i];
                let layer = &self.layers[i];
                for o in 0..layer.out_dim {
                    let d = delta[o];
                    if d != 0.0 {
                        let row = &mut grads.weights[i][o * layer.in_dim..(o + 1) * layer.in_dim];
                        for (g, v) in row.iter_mut().zip(input) {
                            *g += d * v;
                        }
                        grads.bias[i][o] += d;
                    }
                }
                if i > 0 {
                    let mut prev = vec![0.0; layer.in_dim];
                    for o in 0..layer.out_dim {
                        let d = delta[o];
                        if d != 0.0 {
                            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                            for (p, w) in prev.iter_mut().zip(row) {
                                *p += d * w;
                            }
                        }
                    }
                    // ReLU gate: activation zero means the unit was clamped
                    for (p, a) in prev.iter_mut().zip(&acts[i]) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        (loss, grads)
    }

    /// Flat views used by the optimizer and the finite-difference tests.
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn get_parameter(&self, idx: usize) -> f64 {
        let mut i = idx;
        for l in &self.layers {
            if i < l.weights.len() {
                return l.weights[i];
            }
            i -= l.weights.len();
            if i < l.bias.len() {
                return l.bias[i];
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_parameter(&mut self, idx: usize, value: f64) {
        let mut i = idx;
        for l in &mut self.layers {
            if i < l.weights.len() {
                l.weights[i] = value;
                return;
            }
            i -= l.weights.len();
            if i < l.bias.len() {
                l.bias[i] = value;
                return;
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    pub fn gradient_entry(grads: &Gradients, idx: usize) -> f64 {
        let mut i = idx;
        for (w, b) in grads.weights.iter().zip(&grads.bias) {
            if i < w.len() {
                return w[i];
            }
            i -= w.len();
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("gradient index out of range");
    }

    /// Mini-batch Adam over the whole dataset. Deterministic for a given
    /// seed: initialization, shuffling, and update order are all derived
    /// from it.
    pub fn train(&mut self, inputs: &[Vec<f64>], targets: &[Vec<f64>], cfg: &MlpConfig, seed: u64) {
        assert_eq!(inputs.len(), targets.len());
        if inputs.is_empty() {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ada3);
        let mut m: Vec<Vec<f64>> = self
            .layers
            .iter()
            .map(|l| vec![0.0; l.weights.len() + l.bias.len()])
            .collect();
        let mut v = m.clone();
        let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
        let mut t = 0;
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        for _ in 0..cfg.epochs {
            // Fisher-Yates with the seeded rng
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<(&[f64], &[f64])> = chunk
                    .iter()
                    .map(|&i| (inputs[i].as_slice(), targets[i].as_slice()))
                    .collect();
                let (_, grads) = self.loss_and_grad(&batch);
                t += 1;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for (li, layer) in self.layers.iter_mut().enumerate() {
                    let nw = layer.weights.len();
                    for (k, g) in grads.weights[li]
                        .iter()
                        .chain(grads.bias[li].iter())
                        .enumerate()
                    {
                        let mk = &mut m[li][k];
                        *mk = beta1 * *mk + (1.0 - beta1) * g;
                        let vk = &mut v[li][k];
                        *vk = beta2 * *vk + (1.0 - beta2) * g * g;
                        let step = cfg.learning_rate * (*mk / bc1) / ((*vk / bc2).sqrt() + eps);
                        if k < nw {
                            layer.weights[k] -=
                                step + cfg.learning_rate * cfg.weight_decay * layer.weights[k];
                        } else {
                            layer.bias[k - nw] -= step;
                        }
                    }
                }
            }
        }
    }
}
