//! The detection model proper: unbalanced-autoencoder pre-training on the
//! augmented pool, encoder-plus-softmax fine-tuning on the de-duplicated
//! labeled data, and multi-label prediction through the powerset codec.

use crate::dataset::{LabelSet, MultiLabelDataset};
use crate::error::{Error, Result};
use crate::nn::{
    self, bce_loss_and_grad, ce_loss_and_grad, Adam, Checkpoint, MlpSpec, ModelParams,
    OutputActivation, TrainConfig,
};
use crate::powerset::PowersetCodec;
use crate::wgan::AugmentedDataset;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Encoder/decoder pair; the encoder must hold strictly more parameters
/// than the decoder (the unbalanced property).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeSpec {
    pub encoder: MlpSpec,
    pub decoder: MlpSpec,
}

impl AeSpec {
    /// Encoder widths are given in full (input first, code last); the
    /// decoder is the literal single sigmoid layer code -> input.
    pub fn new(encoder_widths: Vec<usize>) -> Result<Self> {
        let input = *encoder_widths.first().ok_or_else(|| {
            Error::Argument("encoder widths must begin with the input width".into())
        })?;
        let code = *encoder_widths.last().unwrap();
        let encoder = MlpSpec::new(encoder_widths, OutputActivation::Identity)?;
        let decoder = MlpSpec::new(vec![code, input], OutputActivation::Sigmoid)?;
        let spec = Self { encoder, decoder };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.decoder.output_width() != self.encoder.input_width() {
            return Err(Error::Argument(
                "decoder output width must equal encoder input width".into(),
            ));
        }
        if self.encoder.output_width() != self.decoder.input_width() {
            return Err(Error::Argument(
                "encoder output width must equal decoder input width".into(),
            ));
        }
        if self.decoder.output != OutputActivation::Sigmoid {
            return Err(Error::Argument("decoder output must be sigmoid".into()));
        }
        if self.encoder.param_count() <= self.decoder.param_count() {
            return Err(Error::Argument(format!(
                "encoder must out-parameterize the decoder ({} vs {})",
                self.encoder.param_count(),
                self.decoder.param_count()
            )));
        }
        Ok(())
    }

    pub fn code_width(&self) -> usize {
        self.encoder.output_width()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PretrainLog {
    pub epochs: Vec<nn::EpochLog>,
}

/// Unsupervised pre-training: minimize the mean per-feature binary
/// cross-entropy between each row and its reconstruction. Labels are
/// ignored; generated rows are welcome here and only here.
pub fn pretrain_ae(
    s_aug: &AugmentedDataset,
    spec: &AeSpec,
    cfg: &TrainConfig,
) -> Result<(Checkpoint, PretrainLog)> {
    spec.validate()?;
    cfg.validate()?;
    if s_aug.is_empty() {
        return Err(Error::Argument("pre-training pool is empty".into()));
    }
    if s_aug.features.ncols() != spec.encoder.input_width() {
        return Err(Error::Shape(format!(
            "pool width {} does not match encoder input {}",
            s_aug.features.ncols(),
            spec.encoder.input_width()
        )));
    }
    for (i, row) in s_aug.features.rows().into_iter().enumerate() {
        if let Some((j, &v)) = row
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Data(format!(
                "feature [{i}][{j}] = {v} outside [0,1]; binary cross-entropy needs unit-range inputs"
            )));
        }
    }

    let mut encoder = nn::init_mlp(&spec.encoder, cfg.seed);
    let mut decoder = nn::init_mlp(&spec.decoder, cfg.seed.wrapping_add(1));
    let mut enc_opt = Adam::new(&encoder, cfg);
    let mut dec_opt = Adam::new(&decoder, cfg);
    let n = s_aug.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = PretrainLog { epochs: Vec::new() };
    let mut steps = 0u64;
    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = s_aug.features.select(Axis(0), chunk);
            let enc_fwd = nn::forward_cached(&spec.encoder, &encoder, &batch)?;
            let dec_fwd = nn::forward_cached(&spec.decoder, &decoder, enc_fwd.output())?;
            let (loss, d_z) = bce_loss_and_grad(dec_fwd.output(), &batch);
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            let (dec_grads, d_code) =
                nn::backward_from_output_pre(&spec.decoder, &decoder, &dec_fwd, &d_z);
            let (enc_grads, _) =
                nn::backward_from_output_pre(&spec.encoder, &encoder, &enc_fwd, &d_code);
            dec_opt.step(&mut decoder, &dec_grads);
            enc_opt.step(&mut encoder, &enc_grads);
            loss_sum += loss;
            batches += 1;
            steps += 1;
        }
        log.epochs.push(nn::EpochLog {
            epoch,
            steps,
            mean_loss: if batches > 0 {
                loss_sum / batches as f64
            } else {
                0.0
            },
        });
    }
    Ok((Checkpoint::new(spec.encoder.clone(), encoder), log))
}

/// The fine-tuned classifier: encoder layers, a softmax head sized by the
/// codec, and the codec itself for decoding predictions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MldClassifier {
    pub encoder_spec: MlpSpec,
    pub encoder: ModelParams,
    pub head_spec: MlpSpec,
    pub head: ModelParams,
    pub codec: PowersetCodec,
    /// Digest of the encoder checkpoint fine-tuning started from, if any.
    pub pretrained_from: Option<String>,
}

/// Per-epoch fine-tuning trace, including the training subset accuracy used
/// by the convergence comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinetuneEpoch {
    pub epoch: usize,
    pub steps: u64,
    pub mean_loss: f64,
    pub train_subsetacc: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FinetuneLog {
    pub epochs: Vec<FinetuneEpoch>,
}

impl FinetuneLog {
    /// First epoch (1-based) whose training subset accuracy reaches the
    /// threshold; `epochs + 1` when never reached.
    pub fn epochs_to_subsetacc(&self, threshold: f64) -> usize {
        self.epochs
            .iter()
            .position(|e| e.train_subsetacc >= threshold)
            .map(|i| i + 1)
            .unwrap_or(self.epochs.len() + 1)
    }

    pub fn final_subsetacc(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.train_subsetacc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub train: TrainConfig,
    /// Weight each unique sample by its duplicate count instead of once.
    #[serde(default)]
    pub multiplicity_weighted: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::new(1e-3, 256, 100, 0),
            multiplicity_weighted: false,
        }
    }
}

/// Build the classifier (pre-trained encoder when a checkpoint is given,
/// fresh otherwise), then fine-tune every layer with cross-entropy over the
/// powerset class of each unique sample.
pub fn build_and_finetune(
    encoder_ckpt: Option<&Checkpoint>,
    encoder_spec: &MlpSpec,
    train: &MultiLabelDataset,
    codec: &PowersetCodec,
    cfg: &FinetuneConfig,
) -> Result<(MldClassifier, FinetuneLog)> {
    cfg.train.validate()?;
    if train.is_empty() {
        return Err(Error::Argument("fine-tuning set is empty".into()));
    }
    if train.has_generated_rows() {
        return Err(Error::GeneratedData);
    }
    if train.dim() != encoder_spec.input_width() {
        return Err(Error::Shape(format!(
            "training width {} does not match encoder input {}",
            train.dim(),
            encoder_spec.input_width()
        )));
    }
    let (mut encoder, pretrained_from) = match encoder_ckpt {
        Some(ckpt) => {
            ckpt.verify()?;
            if ckpt.spec != *encoder_spec {
                return Err(Error::Argument(
                    "encoder checkpoint does not match the requested architecture".into(),
                ));
            }
            (ckpt.params.clone(), Some(ckpt.content_digest.clone()))
        }
        None => (nn::init_mlp(encoder_spec, cfg.train.seed), None),
    };
    let head_spec = MlpSpec::new(
        vec![encoder_spec.output_width(), codec.len()],
        OutputActivation::Softmax,
    )?;
    let mut head = nn::init_mlp(&head_spec, cfg.train.seed.wrapping_add(7));

    let features = train.features_matrix();
    let classes: Vec<usize> = train
        .samples
        .iter()
        .map(|s| codec.encode(&s.labels()))
        .collect::<Result<_>>()?;
    let weights: Vec<f64> = if cfg.multiplicity_weighted {
        train.samples.iter().map(|s| s.total() as f64).collect()
    } else {
        vec![1.0; train.len()]
    };

    let mut enc_opt = Adam::new(&encoder, &cfg.train);
    let mut head_opt = Adam::new(&head, &cfg.train);
    let n = train.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = FinetuneLog::default();
    let mut steps = 0u64;
    for epoch in 0..cfg.train.epochs {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.train.seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.train.batch_size).enumerate() {
            let batch = features.select(Axis(0), chunk);
            let batch_classes: Vec<usize> = chunk.iter().map(|&i| classes[i]).collect();
            let enc_fwd = nn::forward_cached(encoder_spec, &encoder, &batch)?;
            let head_fwd = nn::forward_cached(&head_spec, &head, enc_fwd.output())?;
            // Cross-entropy on the pre-softmax logits.
            let logits = &head_fwd.pre[head_spec.n_layers() - 1];
            let (loss, mut d_logits) = ce_loss_and_grad(logits, &batch_classes);
            if cfg.multiplicity_weighted {
                let batch_w: Vec<f64> = chunk.iter().map(|&i| weights[i]).collect();
                let mean_w: f64 = batch_w.iter().sum::<f64>() / batch_w.len() as f64;
                for (mut row, w) in d_logits.rows_mut().into_iter().zip(&batch_w) {
                    row.mapv_inplace(|v| v * w / mean_w);
                }
            }
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            let (head_grads, d_code) =
                nn::backward_from_output_pre(&head_spec, &head, &head_fwd, &d_logits);
            let (enc_grads, _) =
                nn::backward_from_output_pre(encoder_spec, &encoder, &enc_fwd, &d_code);
            head_opt.step(&mut head, &head_grads);
            enc_opt.step(&mut encoder, &enc_grads);
            loss_sum += loss;
            batches += 1;
            steps += 1;
        }
        let train_subsetacc = {
            let predicted = predict_classes(encoder_spec, &encoder, &head_spec, &head, &features)?;
            let hits = predicted
                .iter()
                .zip(&classes)
                .filter(|(p, c)| p == c)
                .count();
            hits as f64 / n as f64
        };
        log.epochs.push(FinetuneEpoch {
            epoch,
            steps,
            mean_loss: if batches > 0 {
                loss_sum / batches as f64
            } else {
                0.0
            },
            train_subsetacc,
        });
    }
    Ok((
        MldClassifier {
            encoder_spec: encoder_spec.clone(),
            encoder,
            head_spec,
            head,
            codec: codec.clone(),
            pretrained_from,
        },
        log,
    ))
}

fn predict_classes(
    encoder_spec: &MlpSpec,
    encoder: &ModelParams,
    head_spec: &MlpSpec,
    head: &ModelParams,
    samples: &Array2<f64>,
) -> Result<Vec<usize>> {
    let code = nn::forward(encoder_spec, encoder, samples)?;
    let probs = nn::forward(head_spec, head, &code)?;
    Ok(probs
        .rows()
        .into_iter()
        .map(|row| {
            // Argmax with ties broken by the lowest class id.
            let mut best = 0usize;
            let mut best_v = f64::NEG_INFINITY;
            for (i, &v) in row.iter().enumerate() {
                if v > best_v {
                    best = i;
                    best_v = v;
                }
            }
            best
        })
        .collect())
}

impl MldClassifier {
    /// Per-row argmax over the softmax head, decoded through the codec.
    /// Predictions are always registered, non-empty label sets.
    pub fn predict(&self, samples: &Array2<f64>) -> Result<Vec<LabelSet>> {
        if samples.ncols() != self.encoder_spec.input_width() {
            return Err(Error::Shape(format!(
                "sample width {} does not match encoder input {}",
                samples.ncols(),
                self.encoder_spec.input_width()
            )));
        }
        let classes = predict_classes(
            &self.encoder_spec,
            &self.encoder,
            &self.head_spec,
            &self.head,
            samples,
        )?;
        classes.into_iter().map(|c| self.codec.decode(c)).collect()
    }

    /// Check that this model really started from the given encoder
    /// checkpoint; used when loading a model bundle next to its checkpoint.
    pub fn verify_pretrain_linkage(&self, ckpt: &Checkpoint) -> Result<()> {
        ckpt.verify()?;
        match &self.pretrained_from {
            Some(digest) if *digest == ckpt.content_digest => Ok(()),
            Some(digest) => Err(Error::Corrupt(format!(
                "classifier records pre-training digest {digest}, checkpoint has {}",
                ckpt.content_digest
            ))),
            None => Err(Error::Corrupt(
                "classifier was not fine-tuned from a pre-trained encoder".into(),
            )),
        }
    }
}

/// Aggregate detection output over an unlabeled batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionReport {
    pub rows: Vec<Vec<String>>,
    pub set_counts: std::collections::BTreeMap<String, usize>,
    pub label_counts: std::collections::BTreeMap<String, usize>,
    pub total: usize,
}

/// Predict label sets for unknown samples and aggregate counts per label set
/// and per base label.
pub fn detect_report(model: &MldClassifier, unknown: &Array2<f64>) -> Result<DetectionReport> {
    if unknown.nrows() == 0 {
        return Ok(DetectionReport {
            rows: Vec::new(),
            set_counts: Default::default(),
            label_counts: Default::default(),
            total: 0,
        });
    }
    let sets = model.predict(unknown)?;
    let mut set_counts = std::collections::BTreeMap::new();
    let mut label_counts = std::collections::BTreeMap::new();
    let mut rows = Vec::with_capacity(sets.len());
    for set in &sets {
        let key = set.iter().cloned().collect::<Vec<_>>().join(";");
        *set_counts.entry(key).or_insert(0) += 1;
        for label in set {
            *label_counts.entry(label.clone()).or_insert(0) += 1;
        }
        rows.push(set.iter().cloned().collect());
    }
    Ok(DetectionReport {
        rows,
        set_counts,
        label_counts,
        total: sets.len(),
    })
}
