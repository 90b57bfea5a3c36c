//! Multinomial logistic classifier with hand-derived gradients, local
//! SGD training with Nesterov momentum, and the evaluation metrics.
//!
//! Parameters flatten as the weight matrix `W` (classes x dim,
//! row-major) followed by the bias vector, and round-trip exactly.

use crate::error::{Error, Result};
use crate::fedsim::data::Dataset;
use crate::rng::DetRng;

/// Local SGD knobs.
#[derive(Debug, Clone, Copy)]
pub struct TrainingHyperparams {
    pub learning_rate: f64,
    /// Capped at the partition size; the last partial batch is kept.
    pub batch_size: usize,
    pub local_epochs: usize,
    /// Nesterov momentum coefficient.
    pub momentum: f64,
    /// L2 penalty on the weight matrix; the bias is not decayed.
    pub weight_decay: f64,
}

impl Default for TrainingHyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 128,
            local_epochs: 10,
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

impl TrainingHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter {
                name: "learning_rate",
                reason: "must be positive".into(),
            });
        }
        if self.batch_size == 0 || self.local_epochs == 0 {
            return Err(Error::InvalidParameter {
                name: "training",
                reason: "batch_size and local_epochs must be positive".into(),
            });
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter {
                name: "momentum",
                reason: "must lie in [0, 1)".into(),
            });
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::InvalidParameter {
                name: "weight_decay",
                reason: "must be non-negative".into(),
            });
        }
        Ok(())
    }
}

pub fn param_len(classes: usize, dim: usize) -> usize {
    classes * dim + classes
}

fn logits(params: &[f64], x: &[f64], classes: usize, dim: usize) -> Vec<f64> {
    let bias = &params[classes * dim..];
    (0..classes)
        .map(|c| {
            let row = &params[c * dim..(c + 1) * dim];
            let mut z = bias[c];
            for (w, xi) in row.iter().zip(x) {
                z += w * xi;
            }
            z
        })
        .collect()
}

fn argmax_lowest_tie(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy over the batch plus an L2 penalty on the weights,
/// with the analytic gradient in the same flattened layout.
pub fn model_loss_and_grad(
    params: &[f64],
    data: &Dataset,
    batch: &[usize],
    weight_decay: f64,
) -> (f64, Vec<f64>) {
    let classes = data.classes();
    let dim = data.dim();
    debug_assert_eq!(params.len(), param_len(classes, dim));
    assert!(!batch.is_empty(), "batch must be non-empty");

    let mut loss = 0.0;
    let mut grad = vec![0.0; params.len()];
    let inv = 1.0 / batch.len() as f64;

    for &i in batch {
        let x = data.feature_row(i);
        let y = data.label(i);
        let z = logits(params, x, classes, dim);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for zc in &z {
            denom += (zc - max).exp();
        }
        loss -= (z[y] - max - denom.ln()) * inv;

        for c in 0..classes {
            let p = (z[c] - max).exp() / denom;
            let dz = (p - if c == y { 1.0 } else { 0.0 }) * inv;
            let row = &mut grad[c * dim..(c + 1) * dim];
            for (g, xi) in row.iter_mut().zip(x) {
                *g += dz * xi;
            }
            grad[classes * dim + c] += dz;
        }
    }

    if weight_decay > 0.0 {
        let mut penalty = 0.0;
        for (g, w) in grad[..classes * dim].iter_mut().zip(params) {
            penalty += w * w;
            *g += weight_decay * w;
        }
        loss += 0.5 * weight_decay * penalty;
    }

    (loss, grad)
}

/// Runs `epochs` of mini-batch SGD with Nesterov momentum over the given
/// sample indices, shuffling per epoch from the caller's stream. Params
/// and velocity are updated in place so multi-phase training can share
/// optimizer state.
pub fn sgd_epochs(
    params: &mut [f64],
    velocity: &mut [f64],
    data: &Dataset,
    indices: &[usize],
    epochs: usize,
    hp: &TrainingHyperparams,
    rng: &mut DetRng,
) {
    if indices.is_empty() || epochs == 0 {
        return;
    }
    let batch = hp.batch_size.min(indices.len()).max(1);
    let mut order = indices.to_vec();
    for _ in 0..epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(batch) {
            let (_, grad) = model_loss_and_grad(params, data, chunk, hp.weight_decay);
            for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = hp.momentum * *v + g;
                *p -= hp.learning_rate * (g + hp.momentum * *v);
            }
        }
    }
}

/// Local client training: starts from the global parameters and runs the
/// configured epochs of SGD over its partition.
pub fn local_train(
    global: &[f64],
    data: &Dataset,
    indices: &[usize],
    hp: &TrainingHyperparams,
    rng: &mut DetRng,
) -> Vec<f64> {
    let mut params = global.to_vec();
    let mut velocity = vec![0.0; params.len()];
    sgd_epochs(
        &mut params,
        &mut velocity,
        data,
        indices,
        hp.local_epochs,
        hp,
        rng,
    );
    params
}

pub fn predict(params: &[f64], data: &Dataset, i: usize) -> usize {
    let z = logits(params, data.feature_row(i), data.classes(), data.dim());
    argmax_lowest_tie(&z)
}

/// Test accuracy: fraction of samples whose predicted class (lowest id on
/// ties) matches the label.
pub fn evaluate_acc(params: &[f64], data: &Dataset) -> f64 {
    assert!(!data.is_empty(), "test set must be non-empty");
    let correct = (0..data.len())
        .filter(|&i| predict(params, data, i) == data.label(i))
        .count();
    correct as f64 / data.len() as f64
}

/// Attack success rate: fraction of triggered samples predicted as the
/// target class.
pub fn evaluate_asr(params: &[f64], triggered: &Dataset, target_class: usize) -> f64 {
    assert!(!triggered.is_empty(), "triggered set must be non-empty");
    let hits = (0..triggered.len())
        .filter(|&i| predict(params, triggered, i) == target_class)
        .count();
    hits as f64 / triggered.len() as f64
}
