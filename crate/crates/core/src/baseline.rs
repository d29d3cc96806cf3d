//! Backpropagation reference: threshold attention over input patches, one
//! linear layer with bias, softmax cross-entropy and Adam.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{Preprocess, Signal, PATCH_PIXELS};
use crate::error::{Error, Result};
use crate::mnist::RawImage;
use crate::trainer::{plan, Accuracy, FewShotSpec, LogRow, RunLog};

pub const ATTENTION_THRESHOLD: f64 = 0.7;

/// Each patch becomes the normalized sum of itself and every patch at least
/// 0.7-similar to it; the rest slot is dropped and the pixel slots are
/// concatenated.
pub fn input_attention(signals: &[Signal]) -> Vec<f64> {
    let mut out = Vec::with_capacity(signals.len() * PATCH_PIXELS);
    for a in signals {
        let mut sum = vec![0.0; a.dipole.dim()];
        for b in signals
            .iter()
            .filter(|b| a.dipole.dot(&b.dipole) >= ATTENTION_THRESHOLD)
        {
            for (s, x) in sum.iter_mut().zip(b.dipole.components()) {
                *s += x;
            }
        }
        let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.extend(sum[1..].iter().map(|x| x / norm));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub classes: usize,
    pub features: usize,
    /// Row-major `classes x features`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(classes: usize, features: usize) -> Self {
        Self {
            classes,
            features,
            weights: vec![0.0; classes * features],
            bias: vec![0.0; classes],
        }
    }

    /// Weights and bias uniform in `+-1/sqrt(features)`.
    pub fn init_uniform(classes: usize, features: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (features as f64).sqrt();
        let mut draw = |n| (0..n).map(|_| rng.random_range(-bound..bound)).collect::<Vec<f64>>();
        let weights = draw(classes * features);
        let bias = draw(classes);
        Self {
            classes,
            features,
            weights,
            bias,
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.features);
        self.weights
            .chunks_exact(self.features)
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        crate::engine::argmax_first(&self.logits(x))
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.bias).all(|v| v.is_finite())
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of the softmax against `label` and its gradients.
pub fn forward_loss_grad(model: &LinearModel, x: &[f64], label: usize) -> (f64, Gradients) {
    let z = model.logits(x);
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let loss = log_sum - z[label];
    let mut dz = softmax(&z);
    dz[label] -= 1.0;
    let weights = dz.iter().flat_map(|&d| x.iter().map(move |&xi| d * xi)).collect();
    (loss, Gradients { weights, bias: dz })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m_weights: Vec<f64>,
    pub v_weights: Vec<f64>,
    pub m_bias: Vec<f64>,
    pub v_bias: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    pub fn new(model: &LinearModel, lr: f64) -> Self {
        Self {
            m_weights: vec![0.0; model.weights.len()],
            v_weights: vec![0.0; model.weights.len()],
            m_bias: vec![0.0; model.bias.len()],
            v_bias: vec![0.0; model.bias.len()],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }
}

/// Bias-corrected Adam step.
pub fn adam_step(model: &mut LinearModel, state: &mut AdamState, grads: &Gradients) {
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    let (lr, eps) = (state.lr, state.eps);
    let update = |params: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        assert_eq!(params.len(), g.len());
        for i in 0..params.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
        }
    };
    update(
        &mut model.weights,
        &grads.weights,
        &mut state.m_weights,
        &mut state.v_weights,
    );
    update(&mut model.bias, &grads.bias, &mut state.m_bias, &mut state.v_bias);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub lr: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { lr: 1e-3 }
    }
}

/// Weight initialization draws from a stream separate from sampling so the
/// baseline sees the same few-shot pool and order as the main model.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x6270_6261_7365_6c6e)
}

pub fn train_baseline(
    spec: &FewShotSpec,
    train: &[RawImage],
    preprocess: &Preprocess,
    cfg: BaselineConfig,
) -> Result<(LinearModel, RunLog)> {
    let features = 81 * PATCH_PIXELS;
    let mut model = LinearModel::init_uniform(spec.classes.len(), features, &mut init_rng(spec.seed));
    let mut adam = AdamState::new(&model, cfg.lr);
    let mut log = RunLog::default();
    for (step, s) in plan(spec, train)?.into_iter().enumerate() {
        let label = spec
            .classes
            .iter()
            .position(|&c| c == s.label)
            .expect("planned from classes");
        let x = input_attention(&preprocess.signals(&train[s.image]));
        let (loss, grads) = forward_loss_grad(&model, &x, label);
        adam_step(&mut model, &mut adam, &grads);
        if !model.is_finite() {
            return Err(Error::Config(format!("baseline diverged at step {step}")));
        }
        log.rows.push(LogRow {
            step,
            label: s.label,
            j_true: loss,
            checksum: String::new(),
        });
    }
    Ok((model, log))
}

pub fn evaluate_baseline(model: &LinearModel, classes: &[u8], test: &[RawImage], preprocess: &Preprocess) -> Accuracy {
    let mut acc = Accuracy::new(classes);
    for img in test {
        if let Some(truth) = classes.iter().position(|&c| c == img.label) {
            let x = input_attention(&preprocess.signals(img));
            acc.record(truth, model.predict(&x));
        }
    }
    acc
}
