//! Dataset pipeline: raw corpora, categorical encoding, scaling, the
//! duplicate-merge multi-labelization and the synthetic desk-scale generator.

mod canonical;
mod corpus;
mod encode;
mod scale;
mod synth;

pub use canonical::{read_canonical, write_canonical, SidecarMeta};
pub use corpus::{load_csv_corpus, CorpusSchema, UNSW_FEATURE_COUNT, UNSW_LABELS};
pub use encode::{encode_features, encode_features_with, fit_encodings};
pub use scale::{apply_scaler, apply_to_multilabel, fit_scaler, invert_scaler, ScalerKind, ScalerModel};
pub use synth::{synth_generate, SynthGroundTruth, SynthSpec};

use crate::error::{Error, Result};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// A set of label strings; ordered so canonical keys are stable.
pub type LabelSet = BTreeSet<String>;

/// One encoded record: a d-dimensional feature vector and its single raw
/// category label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub raw_label: String,
}

/// An ordered single-label corpus plus its label vocabulary and column names.
///
/// Columns that did not parse as numbers keep their original text in
/// `text_cells` until [`encode_features`] assigns them ordinal codes; the
/// fitted vocabularies land in `encodings` so a test split can reuse them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RawDataset {
    pub feature_names: Vec<String>,
    pub samples: Vec<Sample>,
    pub label_vocabulary: Vec<String>,
    #[serde(default)]
    pub text_cells: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub encodings: BTreeMap<String, Vec<String>>,
}

impl RawDataset {
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Counts per raw label, in vocabulary order.
    pub fn label_counts(&self) -> BTreeMap<String, usize> {
        let mut counts: BTreeMap<String, usize> =
            self.label_vocabulary.iter().map(|l| (l.clone(), 0)).collect();
        for s in &self.samples {
            *counts.entry(s.raw_label.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn validate(&self) -> Result<()> {
        let vocab: BTreeSet<&str> = self.label_vocabulary.iter().map(|s| s.as_str()).collect();
        for (i, s) in self.samples.iter().enumerate() {
            if s.features.len() != self.dim() {
                return Err(Error::Data(format!(
                    "row {i} has {} features, expected {}",
                    s.features.len(),
                    self.dim()
                )));
            }
            if !vocab.contains(s.raw_label.as_str()) {
                return Err(Error::UnknownLabel {
                    label: s.raw_label.clone(),
                    vocabulary: self.label_vocabulary.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Where a row came from: the corpus itself or a trained generator.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Real,
    Generated { category: String },
}

/// A unique sample after duplicate merging: its label set is the union of
/// the merged rows' labels and `multiplicity` keeps the per-label duplicate
/// counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabeledSample {
    pub features: Vec<f64>,
    pub multiplicity: BTreeMap<String, u32>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl MultiLabeledSample {
    pub fn labels(&self) -> LabelSet {
        self.multiplicity.keys().cloned().collect()
    }

    /// Total merged duplicate count.
    pub fn total(&self) -> u64 {
        self.multiplicity.values().map(|&c| c as u64).sum()
    }
}

/// De-duplicated multi-label dataset: feature vectors are pairwise distinct.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MultiLabelDataset {
    pub samples: Vec<MultiLabeledSample>,
    pub label_vocabulary: Vec<String>,
}

impl MultiLabelDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    pub fn features_matrix(&self) -> Array2<f64> {
        let d = self.dim();
        let mut m = Array2::zeros((self.len(), d));
        for (i, s) in self.samples.iter().enumerate() {
            for (j, &v) in s.features.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn label_sets(&self) -> Vec<LabelSet> {
        self.samples.iter().map(|s| s.labels()).collect()
    }

    pub fn has_generated_rows(&self) -> bool {
        self.samples
            .iter()
            .any(|s| matches!(s.provenance, Provenance::Generated { .. }))
    }
}

fn feature_key(features: &[f64]) -> Vec<u64> {
    features.iter().map(|v| v.to_bits()).collect()
}

/// Merge rows with bitwise-identical feature vectors into one multi-labeled
/// sample. Output order is first-occurrence order; per-label duplicate counts
/// are kept in `multiplicity`.
pub fn multilabelize(raw: &RawDataset) -> Result<MultiLabelDataset> {
    if raw.is_empty() {
        return Err(Error::Argument("cannot multilabelize an empty dataset".into()));
    }
    if !raw.text_cells.is_empty() {
        let columns: Vec<&String> = raw.text_cells.keys().collect();
        return Err(Error::Data(format!(
            "columns {columns:?} still hold text; encode categorical columns before de-duplicating"
        )));
    }
    let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(raw.len());
    let mut samples: Vec<MultiLabeledSample> = Vec::new();
    for s in &raw.samples {
        let key = feature_key(&s.features);
        match index.get(&key) {
            Some(&at) => {
                *samples[at].multiplicity.entry(s.raw_label.clone()).or_insert(0) += 1;
            }
            None => {
                index.insert(key, samples.len());
                let mut multiplicity = BTreeMap::new();
                multiplicity.insert(s.raw_label.clone(), 1);
                samples.push(MultiLabeledSample {
                    features: s.features.clone(),
                    multiplicity,
                    provenance: Provenance::Real,
                });
            }
        }
    }
    Ok(MultiLabelDataset {
        samples,
        label_vocabulary: raw.label_vocabulary.clone(),
    })
}

/// One merged duplicate group in an overlap report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapGroup {
    pub total: u64,
    pub per_category: BTreeMap<String, u32>,
}

/// Top duplicate groups plus the dataset's label-cardinality and
/// label-diversity statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapReport {
    pub lcard: f64,
    pub ldiv: usize,
    pub groups: Vec<OverlapGroup>,
}

/// The `top_k` samples by total duplicate count, descending, ties broken by
/// first-occurrence order.
pub fn overlap_report(data: &MultiLabelDataset, top_k: usize) -> Result<OverlapReport> {
    if top_k == 0 {
        return Err(Error::Argument("top_k must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| {
        data.samples[b]
            .total()
            .cmp(&data.samples[a].total())
            .then(a.cmp(&b))
    });
    let groups = order
        .into_iter()
        .take(top_k)
        .map(|i| OverlapGroup {
            total: data.samples[i].total(),
            per_category: data.samples[i].multiplicity.clone(),
        })
        .collect();
    Ok(OverlapReport {
        lcard: crate::metrics::lcard(data)?,
        ldiv: crate::metrics::ldiv(data)?,
        groups,
    })
}

/// Deterministic shuffle-then-partition split into (train, test).
pub fn split(
    data: &MultiLabelDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(MultiLabelDataset, MultiLabelDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let test_idx: BTreeSet<usize> = order[..n_test].iter().copied().collect();
    let mut train = MultiLabelDataset {
        samples: Vec::with_capacity(n - n_test),
        label_vocabulary: data.label_vocabulary.clone(),
    };
    let mut test = MultiLabelDataset {
        samples: Vec::with_capacity(n_test),
        label_vocabulary: data.label_vocabulary.clone(),
    };
    for (i, s) in data.samples.iter().enumerate() {
        if test_idx.contains(&i) {
            test.samples.push(s.clone());
        } else {
            train.samples.push(s.clone());
        }
    }
    Ok((train, test))
}

/// Feature vectors appearing in both datasets. The official train and test
/// splits are de-duplicated independently; this reports (never removes)
/// duplicates that straddle the boundary.
pub fn cross_split_duplicates(a: &MultiLabelDataset, b: &MultiLabelDataset) -> usize {
    let keys: std::collections::HashSet<Vec<u64>> =
        a.samples.iter().map(|s| feature_key(&s.features)).collect();
    b.samples
        .iter()
        .filter(|s| keys.contains(&feature_key(&s.features)))
        .count()
}
