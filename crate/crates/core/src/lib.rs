//! Multi-label network-attack detection toolkit.
//!
//! Attack corpora often contain records from different attack categories
//! whose feature vectors are exactly equal; merging those duplicates turns
//! single-label corpora into multi-label ones. This crate implements the
//! full pipeline around that observation: duplicate-merge labelization and
//! overlap analysis, per-category WGAN-GP data augmentation with an
//! other-category penalty on the critic, unbalanced-autoencoder
//! pre-training, a Label-PowerSet softmax detector, the example-based metric
//! suite, problem-transformation baselines (BR / CLR / CC and ML-KNN), and a
//! seeded experiment runner with k-fold reports.

pub mod baselines;
pub mod dataset;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod powerset;
pub mod wgan;

pub use dataset::{
    LabelSet, MultiLabelDataset, MultiLabeledSample, Provenance, RawDataset, Sample, ScalerModel,
    SynthSpec,
};
pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use nn::{Checkpoint, MlpSpec, ModelParams, OutputActivation, TrainConfig};
pub use powerset::PowersetCodec;
