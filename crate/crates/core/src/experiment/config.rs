//! Run configuration: dataset source, pipeline toggles and per-phase
//! settings, with a stable content digest for reproducibility checks.

use crate::dataset::{CorpusSchema, SynthSpec};
use crate::detector::FinetuneConfig;
use crate::error::Result;
use crate::nn::TrainConfig;
use crate::wgan::WganConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    Csv {
        schema: CorpusSchema,
        train_paths: Vec<PathBuf>,
        /// Official held-out split; when absent the corpus is split by
        /// `test_fraction` after de-duplication.
        #[serde(default)]
        test_paths: Vec<PathBuf>,
        /// Columns to ordinal-encode before de-duplication.
        #[serde(default)]
        categorical_columns: Vec<String>,
    },
    Synth(SynthSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PretrainSource {
    None,
    Raw,
    Augmented,
}

impl std::str::FromStr for PretrainSource {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PretrainSource::None),
            "raw" => Ok(PretrainSource::Raw),
            "augmented" => Ok(PretrainSource::Augmented),
            other => Err(crate::error::Error::Argument(format!(
                "unknown pretrain source {other:?} (expected none, raw or augmented)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub per_category: usize,
    /// Categories excluded from augmentation.
    #[serde(default)]
    pub exclude: Vec<String>,
    pub wgan: WganConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    /// Reduce to this dimension before min-max scaling when set.
    #[serde(default)]
    pub pca_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    /// Used when the dataset carries no official test split.
    pub test_fraction: f64,
    #[serde(default)]
    pub folds: Option<usize>,
    pub scaling: ScalingConfig,
    pub pretrain: PretrainSource,
    #[serde(default)]
    pub augment: Option<AugmentConfig>,
    /// Encoder widths, input first, code last; the decoder is the single
    /// mirror layer.
    pub encoder_widths: Vec<usize>,
    pub ae_train: TrainConfig,
    pub finetune: FinetuneConfig,
    /// Train baselines on duplicate-frequency-replicated data instead of
    /// one row per unique sample.
    #[serde(default)]
    pub baselines_weighted_by_multiplicity: bool,
    pub seed: u64,
}

impl RunConfig {
    /// Desk-scale preset around a synthetic corpus.
    pub fn synth_desk(spec: SynthSpec) -> Self {
        let d = spec.dim;
        let mut wgan = WganConfig::for_dim(d, &[16, 32], &[32, 16]);
        wgan.noise_dim = 16;
        wgan.generator_spec = crate::nn::MlpSpec::new(
            vec![16, 16, 32, d],
            crate::nn::OutputActivation::Sigmoid,
        )
        .unwrap();
        wgan.train = TrainConfig::new(1e-3, 64, 150, 0);
        // Momentum-free first moment keeps the penalized critic stable.
        wgan.train.beta1 = 0.0;
        wgan.train.beta2 = 0.9;
        RunConfig {
            dataset: DatasetSpec::Synth(spec),
            test_fraction: 0.2,
            folds: None,
            scaling: ScalingConfig { pca_dim: None },
            pretrain: PretrainSource::Augmented,
            augment: Some(AugmentConfig {
                per_category: 400,
                exclude: Vec::new(),
                wgan,
            }),
            encoder_widths: vec![d, 32, 16, 8],
            ae_train: TrainConfig::new(1e-3, 64, 30, 0),
            finetune: FinetuneConfig {
                train: TrainConfig::new(1e-3, 64, 25, 0),
                multiplicity_weighted: false,
            },
            baselines_weighted_by_multiplicity: false,
            seed: 0,
        }
    }

    /// Desk-scale ablation preset: short pre-training and fine-tuning
    /// budgets so the three pre-training conditions are still separated at
    /// the end of the run, with a generated pool large enough to dominate
    /// the pre-training steps.
    pub fn synth_ablation(spec: SynthSpec) -> Self {
        let mut cfg = Self::synth_desk(spec);
        cfg.ae_train.epochs = 6;
        cfg.finetune.train.epochs = 8;
        if let Some(aug) = cfg.augment.as_mut() {
            aug.per_category = 4000;
        }
        cfg
    }

    /// Full-scale preset for the official 42-feature corpus.
    pub fn unsw(train_paths: Vec<PathBuf>, test_paths: Vec<PathBuf>) -> Self {
        RunConfig {
            dataset: DatasetSpec::Csv {
                schema: CorpusSchema::UnswNb15,
                train_paths,
                test_paths,
                categorical_columns: vec!["proto".into(), "service".into(), "state".into()],
            },
            test_fraction: 0.2,
            folds: None,
            scaling: ScalingConfig { pca_dim: None },
            pretrain: PretrainSource::Augmented,
            augment: Some(AugmentConfig {
                per_category: 30_000,
                exclude: Vec::new(),
                wgan: WganConfig::for_dim(42, &[64, 128, 256], &[64, 32, 24]),
            }),
            encoder_widths: vec![42, 512, 256, 128, 64],
            ae_train: TrainConfig::new(1e-3, 256, 50, 0),
            finetune: FinetuneConfig {
                train: TrainConfig::new(1e-3, 256, 100, 0),
                multiplicity_weighted: false,
            },
            baselines_weighted_by_multiplicity: false,
            seed: 0,
        }
    }

    /// Full-scale preset for the per-category static-feature corpus:
    /// de-duplicate in raw space, then reduce to 64 dimensions.
    pub fn andmal(train_paths: Vec<PathBuf>) -> Self {
        RunConfig {
            dataset: DatasetSpec::Csv {
                schema: CorpusSchema::Andmal2020,
                train_paths,
                test_paths: Vec::new(),
                categorical_columns: Vec::new(),
            },
            test_fraction: 0.2,
            folds: None,
            scaling: ScalingConfig { pca_dim: Some(64) },
            pretrain: PretrainSource::Augmented,
            augment: Some(AugmentConfig {
                per_category: 20_000,
                exclude: Vec::new(),
                wgan: WganConfig::for_dim(64, &[128, 256, 512], &[128, 64, 24]),
            }),
            encoder_widths: vec![64, 1024, 512, 256, 128],
            ae_train: TrainConfig::new(1e-3, 256, 50, 0),
            finetune: FinetuneConfig {
                train: TrainConfig::new(1e-3, 256, 100, 0),
                multiplicity_weighted: false,
            },
            baselines_weighted_by_multiplicity: false,
            seed: 0,
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        if !path.exists() {
            return Err(crate::error::Error::MissingInput {
                path: path.to_path_buf(),
            });
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Stable digest over the canonical serialized form; identical configs
    /// always digest identically.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        format!("{:x}", hasher.finalize())
    }

    /// Digest of the dataset portion only; reports from the same corpus
    /// share it regardless of pipeline toggles.
    pub fn dataset_digest(&self) -> String {
        let json = serde_json::to_string(&self.dataset).expect("dataset spec serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        format!("{:x}", hasher.finalize())
    }
}
