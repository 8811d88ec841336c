//! Multi-label k-nearest-neighbor classifier: per-label priors and
//! neighbor-count conditionals with Laplace smoothing, maximum-a-posteriori
//! label inclusion at prediction time.

use crate::dataset::{LabelSet, MultiLabelDataset};
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlknnModel {
    pub k: usize,
    pub s: f64,
    pub labels: Vec<String>,
    train_features: Vec<Vec<f64>>,
    train_has_label: Vec<Vec<bool>>,
    /// P(label present), smoothed.
    priors: Vec<f64>,
    /// cond_with[l][c] = P(c of k neighbors carry l | l present), c in 0..=k.
    cond_with: Vec<Vec<f64>>,
    cond_without: Vec<Vec<f64>>,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the k nearest rows to `x` (optionally excluding one row),
/// distance ties broken by row index.
fn k_nearest(rows: &[Vec<f64>], x: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut distances: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, r)| (squared_distance(r, x), i))
        .collect();
    distances.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    distances.truncate(k);
    distances.into_iter().map(|(_, i)| i).collect()
}

/// Fit priors and neighbor-count conditional tables on the training data.
pub fn fit_mlknn(data: &MultiLabelDataset, k: usize, s: f64) -> Result<MlknnModel> {
    let n = data.len();
    if n == 0 {
        return Err(Error::Argument("cannot fit on an empty dataset".into()));
    }
    if k == 0 || k >= n {
        return Err(Error::Argument(format!(
            "k must satisfy 1 <= k < {n}, got {k}"
        )));
    }
    if s <= 0.0 {
        return Err(Error::Argument("smoothing must be positive".into()));
    }
    let labels = data.label_vocabulary.clone();
    let m = labels.len();
    let train_features: Vec<Vec<f64>> = data.samples.iter().map(|r| r.features.clone()).collect();
    let train_has_label: Vec<Vec<bool>> = data
        .samples
        .iter()
        .map(|r| labels.iter().map(|l| r.multiplicity.contains_key(l)).collect())
        .collect();

    let priors: Vec<f64> = (0..m)
        .map(|l| {
            let count = train_has_label.iter().filter(|h| h[l]).count() as f64;
            (s + count) / (2.0 * s + n as f64)
        })
        .collect();

    // Histogram the per-sample neighbor counts for each label.
    let mut with_counts = vec![vec![0u64; k + 1]; m];
    let mut without_counts = vec![vec![0u64; k + 1]; m];
    for i in 0..n {
        let neighbors = k_nearest(&train_features, &train_features[i], k, Some(i));
        for l in 0..m {
            let c = neighbors.iter().filter(|&&j| train_has_label[j][l]).count();
            if train_has_label[i][l] {
                with_counts[l][c] += 1;
            } else {
                without_counts[l][c] += 1;
            }
        }
    }
    let smooth = |counts: &[u64]| -> Vec<f64> {
        let total: u64 = counts.iter().sum();
        counts
            .iter()
            .map(|&c| (s + c as f64) / (s * (k + 1) as f64 + total as f64))
            .collect()
    };
    Ok(MlknnModel {
        k,
        s,
        labels,
        cond_with: with_counts.iter().map(|c| smooth(c)).collect(),
        cond_without: without_counts.iter().map(|c| smooth(c)).collect(),
        train_features,
        train_has_label,
        priors,
    })
}

impl MlknnModel {
    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn conditionals(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.cond_with, &self.cond_without)
    }
}

/// Include each label whose posterior-with beats (or ties) its
/// posterior-without; an empty outcome falls back to the label with the
/// highest posterior ratio.
pub fn predict_mlknn(model: &MlknnModel, x: &[f64]) -> Result<LabelSet> {
    if x.len() != model.train_features[0].len() {
        return Err(Error::Shape(format!(
            "query width {} does not match training width {}",
            x.len(),
            model.train_features[0].len()
        )));
    }
    let neighbors = k_nearest(&model.train_features, x, model.k, None);
    let mut out = LabelSet::new();
    let mut best: Option<(f64, usize)> = None;
    for (l, label) in model.labels.iter().enumerate() {
        let c = neighbors
            .iter()
            .filter(|&&j| model.train_has_label[j][l])
            .count();
        let with = model.priors[l] * model.cond_with[l][c];
        let without = (1.0 - model.priors[l]) * model.cond_without[l][c];
        if with >= without {
            out.insert(label.clone());
        }
        let ratio = with / without.max(f64::MIN_POSITIVE);
        if best.is_none_or(|(b, _)| ratio > b) {
            best = Some((ratio, l));
        }
    }
    if out.is_empty() {
        if let Some((_, l)) = best {
            out.insert(model.labels[l].clone());
        }
    }
    Ok(out)
}

/// Batch prediction over matrix rows.
pub fn predict_mlknn_batch(model: &MlknnModel, x: &Array2<f64>) -> Result<Vec<LabelSet>> {
    x.rows()
        .into_iter()
        .map(|r| predict_mlknn(model, r.as_slice().unwrap()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{multilabelize, synth_generate, RawDataset, Sample, SynthSpec};
    use std::collections::BTreeMap;

    fn hand_corpus() -> MultiLabelDataset {
        // 12 samples on a line; labels A (low), B (high), AB in the middle.
        let rows: Vec<(f64, Vec<&str>)> = vec![
            (0.0, vec!["A"]),
            (0.1, vec!["A"]),
            (0.2, vec!["A"]),
            (0.3, vec!["A"]),
            (0.45, vec!["A", "B"]),
            (0.5, vec!["A", "B"]),
            (0.55, vec!["A", "B"]),
            (0.6, vec!["B"]),
            (0.7, vec!["B"]),
            (0.8, vec!["B"]),
            (0.9, vec!["B"]),
            (1.0, vec!["B"]),
        ];
        let raw = RawDataset {
            feature_names: vec!["x".into()],
            samples: rows
                .iter()
                .flat_map(|(v, ls)| {
                    ls.iter().map(move |l| Sample {
                        features: vec![*v],
                        raw_label: l.to_string(),
                    })
                })
                .collect(),
            label_vocabulary: vec!["A".into(), "B".into()],
            text_cells: BTreeMap::new(),
            encodings: BTreeMap::new(),
        };
        multilabelize(&raw).unwrap()
    }

    #[test]
    fn prior_arithmetic_matches_the_smoothed_definition() {
        // N = 3 unique samples, label A present once, s = 1 -> (1+1)/(2+3).
        let raw = RawDataset {
            feature_names: vec!["x".into()],
            samples: vec![
                Sample { features: vec![0.0], raw_label: "A".into() },
                Sample { features: vec![1.0], raw_label: "B".into() },
                Sample { features: vec![2.0], raw_label: "B".into() },
            ],
            label_vocabulary: vec!["A".into(), "B".into()],
            text_cells: BTreeMap::new(),
            encodings: BTreeMap::new(),
        };
        let ml = multilabelize(&raw).unwrap();
        let model = fit_mlknn(&ml, 1, 1.0).unwrap();
        assert!((model.priors()[0] - 2.0 / 5.0).abs() < 1e-12);
        assert!((model.priors()[1] - 3.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn all_samples_carrying_a_label_saturates_its_prior() {
        let raw = RawDataset {
            feature_names: vec!["x".into()],
            samples: (0..4)
                .map(|i| Sample {
                    features: vec![i as f64],
                    raw_label: "L".into(),
                })
                .collect(),
            label_vocabulary: vec!["L".into()],
            text_cells: BTreeMap::new(),
            encodings: BTreeMap::new(),
        };
        let ml = multilabelize(&raw).unwrap();
        let model = fit_mlknn(&ml, 2, 1.0).unwrap();
        // (s + N) / (2s + N) with N = 4, s = 1.
        assert!((model.priors()[0] - 5.0 / 6.0).abs() < 1e-12);
    }

    // Exhaustive oracle: recompute the conditional tables by brute-force
    // enumeration over all pairs.
    fn oracle_tables(
        data: &MultiLabelDataset,
        k: usize,
        s: f64,
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let labels = data.label_vocabulary.clone();
        let n = data.len();
        let mut with = vec![vec![0u64; k + 1]; labels.len()];
        let mut without = vec![vec![0u64; k + 1]; labels.len()];
        for i in 0..n {
            // All-pairs distances, pick k nearest by (distance, index).
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dist: f64 = data.samples[i]
                        .features
                        .iter()
                        .zip(&data.samples[j].features)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (dist, j)
                })
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let neighbors: Vec<usize> = d.iter().take(k).map(|&(_, j)| j).collect();
            for (l, name) in labels.iter().enumerate() {
                let c = neighbors
                    .iter()
                    .filter(|&&j| data.samples[j].multiplicity.contains_key(name))
                    .count();
                if data.samples[i].multiplicity.contains_key(name) {
                    with[l][c] += 1;
                } else {
                    without[l][c] += 1;
                }
            }
        }
        let smooth = |counts: &Vec<u64>| {
            let total: u64 = counts.iter().sum();
            counts
                .iter()
                .map(|&c| (s + c as f64) / (s * (k + 1) as f64 + total as f64))
                .collect::<Vec<f64>>()
        };
        (
            with.iter().map(smooth).collect(),
            without.iter().map(smooth).collect(),
        )
    }

    #[test]
    fn conditional_tables_match_the_exhaustive_oracle() {
        let data = hand_corpus();
        let model = fit_mlknn(&data, 3, 1.0).unwrap();
        let (want_with, want_without) = oracle_tables(&data, 3, 1.0);
        let (got_with, got_without) = model.conditionals();
        assert_eq!(got_with, want_with.as_slice());
        assert_eq!(got_without, want_without.as_slice());
        // Probability entries live strictly inside (0,1) under smoothing.
        for table in got_with.iter().chain(got_without) {
            assert_eq!(table.len(), 4);
            assert!(table.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn duplicate_of_a_training_point_recovers_its_labels() {
        let spec = SynthSpec::separable(3, 60, 4, 17);
        let (raw, _) = synth_generate(&spec).unwrap();
        let data = multilabelize(&raw).unwrap();
        let model = fit_mlknn(&data, 5, 1.0).unwrap();
        let mut hits = 0;
        for sample in data.samples.iter().take(30) {
            if predict_mlknn(&model, &sample.features).unwrap() == sample.labels() {
                hits += 1;
            }
        }
        assert!(hits >= 29, "only {hits}/30 exact");
    }

    #[test]
    fn k_bounds_are_enforced() {
        let data = hand_corpus();
        assert!(fit_mlknn(&data, 0, 1.0).is_err());
        assert!(fit_mlknn(&data, data.len(), 1.0).is_err());
        assert!(fit_mlknn(&data, 3, 0.0).is_err());
    }

    #[test]
    fn predictions_are_never_empty() {
        let data = hand_corpus();
        let model = fit_mlknn(&data, 3, 1.0).unwrap();
        for x in [-5.0, 0.5, 5.0] {
            assert!(!predict_mlknn(&model, &[x]).unwrap().is_empty());
        }
    }
}
