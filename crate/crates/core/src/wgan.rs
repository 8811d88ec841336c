//! Per-category WGAN-GP data augmentation. The critic minimizes the usual
//! Wasserstein objective with a gradient penalty plus an extra penalty term:
//! the mean critic score on the *other* categories' real samples, so the
//! generated data for one category stays away from the rest.

use crate::dataset::{MultiLabelDataset, Provenance};
use crate::error::{Error, Result};
use crate::nn::{
    self, Adam, Checkpoint, Grads, MlpSpec, ModelParams, OutputActivation, TrainConfig,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WganConfig {
    /// Gradient-penalty weight (lambda).
    pub lambda_gp: f64,
    /// Other-category penalty weight (lambda').
    pub lambda_other: f64,
    pub noise_dim: usize,
    pub critic_steps_per_gen: usize,
    pub generator_spec: MlpSpec,
    pub critic_spec: MlpSpec,
    pub train: TrainConfig,
}

impl WganConfig {
    /// Conventional defaults around the given feature width: lambda 10,
    /// lambda' 1, 5 critic steps per generator step.
    pub fn for_dim(feature_dim: usize, gen_hidden: &[usize], critic_hidden: &[usize]) -> Self {
        let noise_dim = 100;
        let mut gen_widths = vec![noise_dim];
        gen_widths.extend_from_slice(gen_hidden);
        gen_widths.push(feature_dim);
        let mut critic_widths = vec![feature_dim];
        critic_widths.extend_from_slice(critic_hidden);
        critic_widths.push(1);
        Self {
            lambda_gp: 10.0,
            lambda_other: 1.0,
            noise_dim,
            critic_steps_per_gen: 5,
            generator_spec: MlpSpec::new(gen_widths, OutputActivation::Sigmoid).unwrap(),
            critic_spec: MlpSpec::new(critic_widths, OutputActivation::Identity).unwrap(),
            train: TrainConfig::new(1e-3, 64, 200, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_gp < 0.0 || self.lambda_other < 0.0 {
            return Err(Error::Argument("penalty weights must be non-negative".into()));
        }
        if self.noise_dim == 0 {
            return Err(Error::Argument("noise dimension must be at least 1".into()));
        }
        if self.generator_spec.input_width() != self.noise_dim {
            return Err(Error::Argument(format!(
                "generator input width {} must equal noise_dim {}",
                self.generator_spec.input_width(),
                self.noise_dim
            )));
        }
        if self.generator_spec.output_width() != self.critic_spec.input_width() {
            return Err(Error::Argument(
                "generator output width must match critic input width".into(),
            ));
        }
        if self.critic_spec.output_width() != 1
            || self.critic_spec.output != OutputActivation::Identity
        {
            return Err(Error::Argument(
                "the critic must produce one unconstrained score".into(),
            ));
        }
        if self.critic_steps_per_gen == 0 {
            return Err(Error::Argument("critic_steps_per_gen must be at least 1".into()));
        }
        self.train.validate()
    }
}

/// A trained generator for one category.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CategoryGenerator {
    pub category: String,
    pub generator: Checkpoint,
    pub fitted_feature_dim: usize,
}

/// Per-epoch scores kept for diagnostics and the convergence checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WganEpoch {
    pub epoch: usize,
    pub critic_loss: f64,
    pub generator_loss: f64,
    /// mean critic score on real minus mean critic score on generated.
    pub critic_gap: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct WganTrainLog {
    pub epochs: Vec<WganEpoch>,
}

impl WganTrainLog {
    /// Mean absolute real-vs-generated critic gap over fixed-size epoch
    /// windows; the convergence oracle checks these shrink.
    pub fn windowed_abs_gap(&self, window: usize) -> Vec<f64> {
        self.epochs
            .chunks(window)
            .filter(|c| c.len() == window)
            .map(|c| c.iter().map(|e| e.critic_gap.abs()).sum::<f64>() / c.len() as f64)
            .collect()
    }
}

/// Gradient penalty: for each row pair draw
/// epsilon uniformly, interpolate real and fake, and penalize the squared
/// deviation of the critic's input-gradient norm from 1. Returns the penalty
/// and its gradient with respect to the critic parameters.
pub fn gradient_penalty(
    critic_spec: &MlpSpec,
    critic: &ModelParams,
    real_batch: &Array2<f64>,
    fake_batch: &Array2<f64>,
    seed: u64,
) -> Result<(f64, Grads)> {
    if real_batch.ncols() != fake_batch.ncols() {
        return Err(Error::Shape(format!(
            "real batch width {} vs fake batch width {}",
            real_batch.ncols(),
            fake_batch.ncols()
        )));
    }
    if real_batch.nrows() != fake_batch.nrows() || real_batch.nrows() == 0 {
        return Err(Error::Shape(
            "real and fake batches must have the same non-zero row count".into(),
        ));
    }
    let b = real_batch.nrows();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut interpolated = Array2::zeros(real_batch.dim());
    for i in 0..b {
        let eps: f64 = rng.gen_range(0.0..1.0);
        for j in 0..real_batch.ncols() {
            interpolated[(i, j)] = eps * real_batch[(i, j)] + (1.0 - eps) * fake_batch[(i, j)];
        }
    }
    let (grad, fwd, ig) = nn::input_gradient_cached(critic_spec, critic, &interpolated)?;
    let mut penalty = 0.0;
    let mut upstream = Array2::zeros(grad.dim());
    for i in 0..b {
        let norm = grad.row(i).dot(&grad.row(i)).sqrt();
        penalty += (norm - 1.0).powi(2);
        if norm > 1e-12 {
            let scale = 2.0 * (norm - 1.0) / norm / b as f64;
            for j in 0..grad.ncols() {
                upstream[(i, j)] = scale * grad[(i, j)];
            }
        }
    }
    penalty /= b as f64;
    let grads = nn::input_gradient_param_grads(critic_spec, critic, &ig, &fwd, &upstream);
    Ok((penalty, grads))
}

/// The critic objective: mean score on fakes minus mean score on the
/// category's real pool, plus lambda times the gradient penalty, plus
/// lambda' times the mean score on the other categories' real pool.
pub fn critic_loss(
    critic_on_fake: &[f64],
    critic_on_real_i: &[f64],
    critic_on_other: &[f64],
    gp: f64,
    cfg: &WganConfig,
) -> Result<f64> {
    if critic_on_fake.is_empty() || critic_on_real_i.is_empty() {
        return Err(Error::Argument("critic score vectors must be non-empty".into()));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut loss = mean(critic_on_fake) - mean(critic_on_real_i) + cfg.lambda_gp * gp;
    if cfg.lambda_other > 0.0 {
        if critic_on_other.is_empty() {
            return Err(Error::Argument(
                "other-category scores are required when lambda' > 0".into(),
            ));
        }
        loss += cfg.lambda_other * mean(critic_on_other);
    }
    Ok(loss)
}

/// Standard generator objective: minimize the negated mean critic score on
/// the generated batch.
pub fn generator_loss(
    critic_spec: &MlpSpec,
    critic: &ModelParams,
    fake_batch: &Array2<f64>,
) -> Result<f64> {
    let scores = nn::forward(critic_spec, critic, fake_batch)?;
    Ok(-scores.mean().unwrap_or(0.0))
}

/// The full critic objective on fixed batches, with its gradient with
/// respect to the critic parameters: Wasserstein terms, gradient penalty and
/// the other-category penalty combined.
pub fn critic_loss_grads(
    critic_spec: &MlpSpec,
    critic: &ModelParams,
    real_batch: &Array2<f64>,
    fake_batch: &Array2<f64>,
    other_batch: &Array2<f64>,
    cfg: &WganConfig,
    gp_seed: u64,
) -> Result<(f64, Grads)> {
    let b = real_batch.nrows();
    let inv_b = 1.0 / b as f64;
    let fake_fwd = nn::forward_cached(critic_spec, critic, fake_batch)?;
    let real_fwd = nn::forward_cached(critic_spec, critic, real_batch)?;
    let (fake_grads, _) = nn::backward_from_output_pre(
        critic_spec,
        critic,
        &fake_fwd,
        &Array2::from_elem((b, 1), inv_b),
    );
    let (real_grads, _) = nn::backward_from_output_pre(
        critic_spec,
        critic,
        &real_fwd,
        &Array2::from_elem((b, 1), -inv_b),
    );
    let mut grads = Grads::zeros_like(critic);
    grads.add_scaled(&fake_grads, 1.0);
    grads.add_scaled(&real_grads, 1.0);

    let mut other_scores: Vec<f64> = Vec::new();
    if cfg.lambda_other > 0.0 {
        if other_batch.nrows() == 0 {
            return Err(Error::Argument(
                "other-category batch is required when lambda' > 0".into(),
            ));
        }
        let other_fwd = nn::forward_cached(critic_spec, critic, other_batch)?;
        let (other_grads, _) = nn::backward_from_output_pre(
            critic_spec,
            critic,
            &other_fwd,
            &Array2::from_elem((other_batch.nrows(), 1), cfg.lambda_other / other_batch.nrows() as f64),
        );
        grads.add_scaled(&other_grads, 1.0);
        other_scores = other_fwd.output().column(0).to_vec();
    }

    let (gp, gp_grads) = gradient_penalty(critic_spec, critic, real_batch, fake_batch, gp_seed)?;
    grads.add_scaled(&gp_grads, cfg.lambda_gp);

    let fake_scores = fake_fwd.output().column(0).to_vec();
    let real_scores = real_fwd.output().column(0).to_vec();
    let loss = critic_loss(&fake_scores, &real_scores, &other_scores, gp, cfg)?;
    Ok((loss, grads))
}

/// Gradients of the full critic objective with respect to the three input
/// batches. The gradient penalty contributes nothing here: the critic is
/// piecewise linear, so its input gradient is locally constant in the
/// interpolates.
pub fn critic_loss_input_grads(
    critic_spec: &MlpSpec,
    critic: &ModelParams,
    real_batch: &Array2<f64>,
    fake_batch: &Array2<f64>,
    other_batch: &Array2<f64>,
    cfg: &WganConfig,
) -> Result<(Array2<f64>, Array2<f64>, Array2<f64>)> {
    let b = real_batch.nrows() as f64;
    let d_fake = nn::input_gradient(critic_spec, critic, fake_batch)?.mapv(|v| v / b);
    let d_real = nn::input_gradient(critic_spec, critic, real_batch)?.mapv(|v| -v / b);
    let d_other = if cfg.lambda_other > 0.0 && other_batch.nrows() > 0 {
        nn::input_gradient(critic_spec, critic, other_batch)?
            .mapv(|v| cfg.lambda_other * v / other_batch.nrows() as f64)
    } else {
        Array2::zeros(other_batch.dim())
    };
    Ok((d_real, d_fake, d_other))
}

/// Generator loss on one noise batch plus its gradient with respect to the
/// generator parameters, backpropagated through the frozen critic.
pub fn generator_grads(
    generator_spec: &MlpSpec,
    generator: &ModelParams,
    critic_spec: &MlpSpec,
    critic: &ModelParams,
    noise: &Array2<f64>,
) -> Result<(f64, Grads)> {
    let gen_fwd = nn::forward_cached(generator_spec, generator, noise)?;
    let fake_batch = gen_fwd.output().clone();
    let b = fake_batch.nrows() as f64;
    let critic_input_grad = nn::input_gradient(critic_spec, critic, &fake_batch)?;
    let upstream = critic_input_grad.mapv(|v| -v / b);
    let d_pre = match generator_spec.output {
        OutputActivation::Sigmoid => &upstream * &fake_batch.mapv(|s| s * (1.0 - s)),
        OutputActivation::Identity => upstream,
        OutputActivation::Softmax => {
            return Err(Error::Argument(
                "softmax generators are not supported".into(),
            ))
        }
    };
    let (grads, _) = nn::backward_from_output_pre(generator_spec, generator, &gen_fwd, &d_pre);
    let loss = generator_loss(critic_spec, critic, &fake_batch)?;
    Ok((loss, grads))
}

fn rows_for<'a>(data: &'a MultiLabelDataset, category: &str) -> (Vec<&'a [f64]>, Vec<&'a [f64]>) {
    let mut real = Vec::new();
    let mut other = Vec::new();
    for s in &data.samples {
        if s.multiplicity.contains_key(category) {
            real.push(s.features.as_slice());
        } else {
            other.push(s.features.as_slice());
        }
    }
    (real, other)
}

fn batch_from(rows: &[&[f64]], indices: &[usize]) -> Array2<f64> {
    let d = rows.first().map_or(0, |r| r.len());
    let mut m = Array2::zeros((indices.len(), d));
    for (bi, &ri) in indices.iter().enumerate() {
        for (j, &v) in rows[ri].iter().enumerate() {
            m[(bi, j)] = v;
        }
    }
    m
}

/// Train the per-category WGAN-GP: the real pool is every unique sample whose
/// label set contains the category, the other pool is the remainder.
/// Alternates `critic_steps_per_gen` critic updates with one generator update.
pub fn train_category_wgan(
    data: &MultiLabelDataset,
    category: &str,
    cfg: &WganConfig,
) -> Result<(CategoryGenerator, WganTrainLog)> {
    cfg.validate()?;
    let d = cfg.generator_spec.output_width();
    if data.dim() != d {
        return Err(Error::Shape(format!(
            "dataset width {} does not match generator output width {d}",
            data.dim()
        )));
    }
    let (real, other) = rows_for(data, category);
    if real.len() < cfg.train.batch_size {
        return Err(Error::Data(format!(
            "category {category:?} has {} samples, fewer than the batch size {}",
            real.len(),
            cfg.train.batch_size
        )));
    }
    if cfg.lambda_other > 0.0 && other.is_empty() {
        return Err(Error::Data(format!(
            "no other-category samples available to train {category:?} with lambda' > 0"
        )));
    }
    for (i, row) in data.samples.iter().enumerate() {
        if let Some((j, &v)) = row.features.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!(
                "feature [{i}][{j}] = {v} outside [0,1]; scale the data to the generator's output range first"
            )));
        }
    }

    let seed = cfg.train.seed;
    let mut generator = nn::init_mlp(&cfg.generator_spec, seed);
    let mut critic = nn::init_mlp(&cfg.critic_spec, seed.wrapping_add(1));
    let mut gen_opt = Adam::new(&generator, &cfg.train);
    let mut critic_opt = Adam::new(&critic, &cfg.train);
    let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(2));
    let b = cfg.train.batch_size;
    let steps_per_epoch = real.len().div_ceil(b);
    let mut log = WganTrainLog::default();
    let mut draw_seed = seed.wrapping_add(3);

    for epoch in 0..cfg.train.epochs {
        let mut critic_loss_sum = 0.0;
        let mut gen_loss_sum = 0.0;
        let mut gap_sum = 0.0;
        let mut gen_updates = 0usize;
        for step in 0..steps_per_epoch {
            let mut last_batches = None;
            for _ in 0..cfg.critic_steps_per_gen {
                let real_idx: Vec<usize> =
                    (0..b).map(|_| rng.gen_range(0..real.len())).collect();
                let real_batch = batch_from(&real, &real_idx);
                draw_seed = draw_seed.wrapping_add(1);
                let noise = nn::sample_noise(b, cfg.noise_dim, draw_seed);
                let fake_batch = nn::forward(&cfg.generator_spec, &generator, &noise)?;
                let other_batch = if cfg.lambda_other > 0.0 {
                    let other_idx: Vec<usize> =
                        (0..b).map(|_| rng.gen_range(0..other.len())).collect();
                    batch_from(&other, &other_idx)
                } else {
                    Array2::zeros((0, d))
                };
                draw_seed = draw_seed.wrapping_add(1);
                let (loss, grads) = critic_loss_grads(
                    &cfg.critic_spec,
                    &critic,
                    &real_batch,
                    &fake_batch,
                    &other_batch,
                    cfg,
                    draw_seed,
                )?;
                if !loss.is_finite() || !grads.is_finite() {
                    return Err(Error::Diverged { epoch, batch: step });
                }
                critic_opt.step(&mut critic, &grads);
                critic_loss_sum += loss;
                last_batches = Some((real_batch, fake_batch));
            }
            // Real-vs-generated score gap on the round's final batches.
            let (last_real_scores, last_fake_scores) = match &last_batches {
                Some((real_batch, fake_batch)) => {
                    let mean_score = |batch: &Array2<f64>| -> Result<f64> {
                        Ok(nn::forward(&cfg.critic_spec, &critic, batch)?
                            .mean()
                            .unwrap_or(0.0))
                    };
                    (mean_score(real_batch)?, mean_score(fake_batch)?)
                }
                None => (0.0, 0.0),
            };

            // One generator update per critic round.
            draw_seed = draw_seed.wrapping_add(1);
            let noise = nn::sample_noise(b, cfg.noise_dim, draw_seed);
            let (gen_loss, gen_grads) = generator_grads(
                &cfg.generator_spec,
                &generator,
                &cfg.critic_spec,
                &critic,
                &noise,
            )?;
            if !gen_loss.is_finite() || !gen_grads.is_finite() {
                return Err(Error::Diverged { epoch, batch: step });
            }
            gen_opt.step(&mut generator, &gen_grads);
            gen_loss_sum += gen_loss;
            gen_updates += 1;
            gap_sum += last_real_scores - last_fake_scores;
        }
        log.epochs.push(WganEpoch {
            epoch,
            critic_loss: critic_loss_sum / (steps_per_epoch * cfg.critic_steps_per_gen) as f64,
            generator_loss: gen_loss_sum / gen_updates.max(1) as f64,
            critic_gap: gap_sum / gen_updates.max(1) as f64,
        });
    }

    Ok((
        CategoryGenerator {
            category: category.to_string(),
            generator: Checkpoint::new(cfg.generator_spec.clone(), generator),
            fitted_feature_dim: d,
        },
        log,
    ))
}

/// Draw `n` generated feature rows, deterministic under the seed. Outputs
/// lie in [0,1] per the generator's sigmoid output and carry no labels.
pub fn generate(gen: &CategoryGenerator, n: usize, seed: u64) -> Result<Array2<f64>> {
    if n == 0 {
        return Err(Error::Argument("cannot generate zero rows".into()));
    }
    let noise = nn::sample_noise(n, gen.generator.spec.input_width(), seed);
    nn::forward(&gen.generator.spec, &gen.generator.params, &noise)
}

/// The pre-training pool: real feature rows plus per-category generated
/// rows, each tagged with its provenance.
#[derive(Debug, Clone)]
pub struct AugmentedDataset {
    pub features: Array2<f64>,
    pub provenance: Vec<Provenance>,
}

impl AugmentedDataset {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn generated_rows(&self) -> usize {
        self.provenance
            .iter()
            .filter(|p| matches!(p, Provenance::Generated { .. }))
            .count()
    }
}

/// Assemble the augmented pool from the de-duplicated real data and
/// `per_category` generated rows from each trained generator.
pub fn build_augmented(
    raw: &MultiLabelDataset,
    generators: &[CategoryGenerator],
    per_category: usize,
    seed: u64,
) -> Result<AugmentedDataset> {
    let d = raw.dim();
    for g in generators {
        if g.fitted_feature_dim != d {
            return Err(Error::Shape(format!(
                "generator for {:?} emits {} features, dataset has {d}",
                g.category, g.fitted_feature_dim
            )));
        }
    }
    let total = raw.len() + per_category * generators.len();
    let mut features = Array2::zeros((total, d));
    let mut provenance = Vec::with_capacity(total);
    for (i, s) in raw.samples.iter().enumerate() {
        for (j, &v) in s.features.iter().enumerate() {
            features[(i, j)] = v;
        }
        provenance.push(Provenance::Real);
    }
    let mut at = raw.len();
    for (gi, g) in generators.iter().enumerate() {
        if per_category == 0 {
            continue;
        }
        let rows = generate(g, per_category, seed.wrapping_add(gi as u64))?;
        for r in 0..per_category {
            for j in 0..d {
                features[(at, j)] = rows[(r, j)];
            }
            provenance.push(Provenance::Generated {
                category: g.category.clone(),
            });
            at += 1;
        }
    }
    Ok(AugmentedDataset {
        features,
        provenance,
    })
}
