//! Dense-network substrate shared by the WGAN-GP, the autoencoder and the
//! classifier: architecture specs, deterministic initialization, forward
//! passes, exact gradients (including input-gradients and their parameter
//! gradients, needed by the gradient penalty) and checkpointing.
//!
//! Everything is f64 and deterministic under explicit seeds. Hidden layers
//! use a leaky rectifier; the output layer is identity, sigmoid or softmax.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use train::{
    bce_loss_and_grad, ce_loss_and_grad, train_steps, Adam, EpochLog, Grads, TrainConfig,
};

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Negative slope of the hidden-layer leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Identity,
    Sigmoid,
    Softmax,
}

/// Architecture of a dense network: layer widths (input first) plus the
/// output activation. Hidden activations are always leaky-rectified.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub output: OutputActivation,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, output: OutputActivation) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::Argument(format!(
                "network needs at least input and output widths, got {:?}",
                layer_widths
            )));
        }
        if layer_widths.contains(&0) {
            return Err(Error::Argument(format!(
                "layer widths must be positive, got {:?}",
                layer_widths
            )));
        }
        Ok(Self {
            layer_widths,
            output,
        })
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    /// Weight entries only, excluding biases.
    pub fn weight_count(&self) -> usize {
        self.layer_widths.windows(2).map(|w| w[0] * w[1]).sum()
    }

    /// Weights plus biases.
    pub fn param_count(&self) -> usize {
        self.weight_count() + self.layer_widths[1..].iter().sum::<usize>()
    }
}

/// Trained or initialized parameters matching an [`MlpSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub init_seed: u64,
}

impl ModelParams {
    pub fn matches(&self, spec: &MlpSpec) -> bool {
        self.weights.len() == spec.n_layers()
            && self.biases.len() == spec.n_layers()
            && self
                .weights
                .iter()
                .zip(spec.layer_widths.windows(2))
                .all(|(w, d)| w.dim() == (d[0], d[1]))
            && self
                .biases
                .iter()
                .zip(&spec.layer_widths[1..])
                .all(|(b, &d)| b.len() == d)
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Fan-in-scaled uniform initialization: weights from U(-1/sqrt(fan_in),
/// 1/sqrt(fan_in)), biases zero. Deterministic under the seed.
pub fn init_mlp(spec: &MlpSpec, seed: u64) -> ModelParams {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(spec.n_layers());
    let mut biases = Vec::with_capacity(spec.n_layers());
    for pair in spec.layer_widths.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound));
        weights.push(w);
        biases.push(Array1::zeros(fan_out));
    }
    ModelParams {
        weights,
        biases,
        init_seed: seed,
    }
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

fn leaky_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Per-layer pre- and post-activation values kept for the backward passes.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Array2<f64>,
    /// pre[l] = inputs to activation of layer l.
    pub pre: Vec<Array2<f64>>,
    /// post[l] = activated outputs of layer l.
    pub post: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().unwrap()
    }
}

fn check_batch(spec: &MlpSpec, params: &ModelParams, batch: &Array2<f64>) -> Result<()> {
    if !params.matches(spec) {
        return Err(Error::Shape(format!(
            "parameters do not match the network shape {:?}",
            spec.layer_widths
        )));
    }
    if batch.ncols() != spec.input_width() {
        return Err(Error::Shape(format!(
            "batch width {} does not match network input width {}",
            batch.ncols(),
            spec.input_width()
        )));
    }
    Ok(())
}

/// Affine-then-activation composition over all layers, keeping caches.
pub fn forward_cached(
    spec: &MlpSpec,
    params: &ModelParams,
    batch: &Array2<f64>,
) -> Result<ForwardCache> {
    check_batch(spec, params, batch)?;
    let n = spec.n_layers();
    let mut pre = Vec::with_capacity(n);
    let mut post = Vec::with_capacity(n);
    let mut a = batch.clone();
    for l in 0..n {
        let mut z = a.dot(&params.weights[l]);
        z += &params.biases[l];
        let activated = if l + 1 < n {
            z.mapv(leaky)
        } else {
            match spec.output {
                OutputActivation::Identity => z.clone(),
                OutputActivation::Sigmoid => z.mapv(sigmoid),
                OutputActivation::Softmax => softmax_rows(&z),
            }
        };
        pre.push(z);
        post.push(activated.clone());
        a = activated;
    }
    Ok(ForwardCache {
        input: batch.clone(),
        pre,
        post,
    })
}

/// Forward pass without caches.
pub fn forward(spec: &MlpSpec, params: &ModelParams, batch: &Array2<f64>) -> Result<Array2<f64>> {
    let mut cache = forward_cached(spec, params, batch)?;
    Ok(cache.post.pop().expect("at least one layer"))
}

/// Backward pass given dL/dz of the output layer (pre-activation gradient).
/// Returns parameter gradients and dL/d(input).
pub fn backward_from_output_pre(
    spec: &MlpSpec,
    params: &ModelParams,
    cache: &ForwardCache,
    d_out_pre: &Array2<f64>,
) -> (Grads, Array2<f64>) {
    let n = spec.n_layers();
    let mut d_weights = vec![Array2::zeros((0, 0)); n];
    let mut d_biases = vec![Array1::zeros(0); n];
    let mut delta = d_out_pre.clone();
    for l in (0..n).rev() {
        let a_prev = if l == 0 { &cache.input } else { &cache.post[l - 1] };
        d_weights[l] = a_prev.t().dot(&delta);
        d_biases[l] = delta.sum_axis(Axis(0));
        let d_a_prev = delta.dot(&params.weights[l].t());
        if l > 0 {
            delta = &d_a_prev * &cache.pre[l - 1].mapv(leaky_prime);
        } else {
            delta = d_a_prev;
        }
    }
    (
        Grads {
            d_weights,
            d_biases,
        },
        delta,
    )
}

/// Per-layer output-gradient factors of the input-gradient pass; reused by
/// the second-order pass of the gradient penalty.
#[derive(Debug, Clone)]
pub struct InputGradCache {
    /// t[l] = dD/dz_l rows, shape b x width(l+1).
    pub t: Vec<Array2<f64>>,
}

/// Gradient of the scalar network output with respect to each input row.
///
/// Only defined for width-1 identity outputs (the critic); other heads would
/// need the activation folded in and nothing here needs that.
pub fn input_gradient_cached(
    spec: &MlpSpec,
    params: &ModelParams,
    batch: &Array2<f64>,
) -> Result<(Array2<f64>, ForwardCache, InputGradCache)> {
    if spec.output_width() != 1 || spec.output != OutputActivation::Identity {
        return Err(Error::Argument(
            "input gradients require a scalar identity-output network".into(),
        ));
    }
    let cache = forward_cached(spec, params, batch)?;
    let n = spec.n_layers();
    let b = batch.nrows();
    let mut t = vec![Array2::zeros((0, 0)); n];
    // dD/dz at the top is 1 for the identity scalar output.
    let mut s = Array2::ones((b, 1));
    for l in (0..n).rev() {
        let t_l = if l + 1 < n {
            &s * &cache.pre[l].mapv(leaky_prime)
        } else {
            s.clone()
        };
        s = t_l.dot(&params.weights[l].t());
        t[l] = t_l;
    }
    Ok((s, cache, InputGradCache { t }))
}

/// Convenience wrapper returning just the per-row input gradients.
pub fn input_gradient(
    spec: &MlpSpec,
    params: &ModelParams,
    batch: &Array2<f64>,
) -> Result<Array2<f64>> {
    input_gradient_cached(spec, params, batch).map(|(g, _, _)| g)
}

/// Parameter gradients of a scalar P that depends on the network only through
/// its input gradients g (as produced by [`input_gradient_cached`]), given
/// upstream = dP/dg. This is the second-order pass behind the gradient
/// penalty. The leaky rectifier is piecewise linear, so the activation-pattern
/// terms vanish and biases receive no gradient.
pub fn input_gradient_param_grads(
    spec: &MlpSpec,
    params: &ModelParams,
    ig: &InputGradCache,
    fwd: &ForwardCache,
    upstream: &Array2<f64>,
) -> Grads {
    let n = spec.n_layers();
    let mut d_weights = Vec::with_capacity(n);
    let mut d_biases = Vec::with_capacity(n);
    let mut r = upstream.clone();
    for l in 0..n {
        d_weights.push(r.t().dot(&ig.t[l]));
        d_biases.push(Array1::zeros(params.biases[l].len()));
        if l + 1 < n {
            let q = r.dot(&params.weights[l]);
            r = &q * &fwd.pre[l].mapv(leaky_prime);
        }
    }
    Grads {
        d_weights,
        d_biases,
    }
}

/// Draw a standard-normal noise batch, deterministic under the seed.
pub fn sample_noise(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| {
        // Box-Muller transform over two uniform draws.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    })
}
