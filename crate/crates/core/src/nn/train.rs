//! Optimization: gradient containers, the adaptive-moment update rule and the
//! shuffled mini-batch training driver.

use super::{MlpSpec, ModelParams};
use crate::error::{Error, Result};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Per-layer parameter gradients, same shapes as [`ModelParams`].
#[derive(Debug, Clone)]
pub struct Grads {
    pub d_weights: Vec<Array2<f64>>,
    pub d_biases: Vec<Array1<f64>>,
}

impl Grads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            d_weights: params.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            d_biases: params.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Grads, factor: f64) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            a.scaled_add(factor, b);
        }
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            a.scaled_add(factor, b);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.d_biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Optimizer and batching configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl TrainConfig {
    pub fn new(learning_rate: f64, batch_size: usize, epochs: usize, seed: u64) -> Self {
        Self {
            learning_rate,
            batch_size,
            epochs,
            seed,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_eps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 {
            return Err(Error::Argument("learning rate must be non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::new(1e-3, 256, 100, 0)
    }
}

/// Adaptive-moment estimation over one parameter set.
pub struct Adam {
    m: Grads,
    v: Grads,
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(params: &ModelParams, cfg: &TrainConfig) -> Self {
        Self {
            m: Grads::zeros_like(params),
            v: Grads::zeros_like(params),
            t: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.epsilon,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &Grads) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for l in 0..params.weights.len() {
            update(
                &mut params.weights[l],
                &grads.d_weights[l],
                &mut self.m.d_weights[l],
                &mut self.v.d_weights[l],
                self.beta1,
                self.beta2,
                self.lr,
                self.eps,
                bc1,
                bc2,
            );
            update1(
                &mut params.biases[l],
                &grads.d_biases[l],
                &mut self.m.d_biases[l],
                &mut self.v.d_biases[l],
                self.beta1,
                self.beta2,
                self.lr,
                self.eps,
                bc1,
                bc2,
            );
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update(
    p: &mut Array2<f64>,
    g: &Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    b1: f64,
    b2: f64,
    lr: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    azip_update(
        p.as_slice_mut().unwrap(),
        g.as_slice().unwrap(),
        m.as_slice_mut().unwrap(),
        v.as_slice_mut().unwrap(),
        b1,
        b2,
        lr,
        eps,
        bc1,
        bc2,
    );
}

#[allow(clippy::too_many_arguments)]
fn update1(
    p: &mut Array1<f64>,
    g: &Array1<f64>,
    m: &mut Array1<f64>,
    v: &mut Array1<f64>,
    b1: f64,
    b2: f64,
    lr: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    azip_update(
        p.as_slice_mut().unwrap(),
        g.as_slice().unwrap(),
        m.as_slice_mut().unwrap(),
        v.as_slice_mut().unwrap(),
        b1,
        b2,
        lr,
        eps,
        bc1,
        bc2,
    );
}

#[allow(clippy::too_many_arguments)]
fn azip_update(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    b1: f64,
    b2: f64,
    lr: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..p.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One line of the run log per epoch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub steps: u64,
    pub mean_loss: f64,
}

/// Mini-batch training driver: shuffles `0..n_rows` deterministically per
/// epoch, hands index batches to `step_fn` (which returns the batch loss and
/// parameter gradients), applies the adaptive-moment update and records the
/// epoch-level mean loss. Aborts with a diverged-training error on any
/// non-finite loss.
pub fn train_steps<F>(
    spec: &MlpSpec,
    params: &mut ModelParams,
    cfg: &TrainConfig,
    n_rows: usize,
    mut step_fn: F,
) -> Result<Vec<EpochLog>>
where
    F: FnMut(&MlpSpec, &ModelParams, &[usize]) -> Result<(f64, Grads)>,
{
    cfg.validate()?;
    let mut optimizer = Adam::new(params, cfg);
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut indices: Vec<usize> = (0..n_rows).collect();
    let mut steps: u64 = 0;
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed.wrapping_add(epoch as u64));
        indices.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch_idx, batch) in indices.chunks(cfg.batch_size).enumerate() {
            let (loss, grads) = step_fn(spec, params, batch)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            optimizer.step(params, &grads);
            loss_sum += loss;
            batches += 1;
            steps += 1;
        }
        log.push(EpochLog {
            epoch,
            steps,
            mean_loss: if batches > 0 { loss_sum / batches as f64 } else { 0.0 },
        });
    }
    Ok(log)
}

/// Mean per-entry binary cross-entropy between a sigmoid output and targets
/// in [0,1], plus dL/dz of the output layer (fused with the sigmoid).
pub fn bce_loss_and_grad(sigmoid_out: &Array2<f64>, target: &Array2<f64>) -> (f64, Array2<f64>) {
    let n = (sigmoid_out.nrows() * sigmoid_out.ncols()) as f64;
    let mut loss = 0.0;
    for (&p, &t) in sigmoid_out.iter().zip(target.iter()) {
        let p = p.clamp(1e-12, 1.0 - 1e-12);
        loss -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    let d_z = (sigmoid_out - target) / n;
    (loss / n, d_z)
}

/// Mean cross-entropy of softmax logits against class ids, plus dL/dz of the
/// output layer (fused with the softmax).
pub fn ce_loss_and_grad(logits: &Array2<f64>, classes: &[usize]) -> (f64, Array2<f64>) {
    let b = logits.nrows() as f64;
    let mut loss = 0.0;
    let mut d_z = Array2::zeros(logits.dim());
    for (row, (&class, logit_row)) in classes.iter().zip(logits.rows()).enumerate() {
        let max = logit_row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logit_row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - logit_row[class];
        for (col, &v) in logit_row.iter().enumerate() {
            let p = (v - lse).exp();
            d_z[(row, col)] = (p - if col == class { 1.0 } else { 0.0 }) / b;
        }
    }
    (loss / b, d_z)
}
