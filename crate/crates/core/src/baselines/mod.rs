//! Problem-transformation baselines (Binary Relevance, Calibrated Label
//! Ranking, Classifier Chains) over pluggable binary learners, plus the
//! ML-KNN algorithm adaptation.

mod learners;
mod mlknn;

pub use learners::{fit_learner, BaseLearnerSpec, FittedLearner, LearnerKind};
pub use mlknn::{fit_mlknn, predict_mlknn, predict_mlknn_batch, MlknnModel};

use crate::dataset::{LabelSet, MultiLabelDataset};
use crate::error::{Error, Result};
use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Br,
    Clr,
    Cc,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "br" => Ok(Strategy::Br),
            "clr" => Ok(Strategy::Clr),
            "cc" => Ok(Strategy::Cc),
            other => Err(Error::Argument(format!(
                "unknown strategy {other:?} (expected br, clr or cc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum StrategyModels {
    Br {
        models: Vec<FittedLearner>,
    },
    Clr {
        /// One model per unordered pair (i < j), scoring "i preferred".
        pairwise: Vec<(usize, usize, FittedLearner)>,
        /// One model per label against the virtual calibration label.
        calibration: Vec<FittedLearner>,
    },
    Cc {
        /// Chain position order as indices into `labels`.
        order: Vec<usize>,
        chain: Vec<FittedLearner>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformModel {
    pub strategy: Strategy,
    pub labels: Vec<String>,
    pub learner: BaseLearnerSpec,
    pub models: StrategyModels,
    /// Labels whose binary targets were single-class and got constant
    /// predictors instead of fitted models.
    pub constant_labels: Vec<String>,
}

fn label_targets(data: &MultiLabelDataset, label: &str) -> Vec<bool> {
    data.samples
        .iter()
        .map(|s| s.multiplicity.contains_key(label))
        .collect()
}

fn spec_for(base: &BaseLearnerSpec, offset: u64) -> BaseLearnerSpec {
    let mut spec = base.clone();
    spec.seed = base.seed.wrapping_add(offset);
    spec
}

/// Fit a problem-transformation model over the de-duplicated data, chaining
/// in canonical sorted-label order.
pub fn fit_transform(
    strategy: Strategy,
    learner: &BaseLearnerSpec,
    data: &MultiLabelDataset,
) -> Result<TransformModel> {
    fit_transform_ordered(strategy, learner, data, None)
}

/// As [`fit_transform`], with an explicit chain permutation for the
/// classifier-chains strategy (ignored by the others).
pub fn fit_transform_ordered(
    strategy: Strategy,
    learner: &BaseLearnerSpec,
    data: &MultiLabelDataset,
    chain_order: Option<&[usize]>,
) -> Result<TransformModel> {
    if data.is_empty() {
        return Err(Error::Argument("cannot fit on an empty dataset".into()));
    }
    let labels = data.label_vocabulary.clone();
    let m = labels.len();
    if m < 2 {
        return Err(Error::Argument("need at least two labels".into()));
    }
    if let Some(order) = chain_order {
        let mut seen = vec![false; m];
        if order.len() != m || order.iter().any(|&i| i >= m || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::Argument(format!(
                "chain order must be a permutation of 0..{m}"
            )));
        }
    }
    let features = data.features_matrix();
    let mut constant_labels = Vec::new();

    let models = match strategy {
        Strategy::Br => {
            let fitted: Vec<(usize, FittedLearner)> = labels
                .par_iter()
                .enumerate()
                .map(|(l, label)| {
                    let y = label_targets(data, label);
                    fit_learner(&spec_for(learner, l as u64), &features, &y).map(|f| (l, f))
                })
                .collect::<Result<_>>()?;
            let mut models = vec![None; m];
            for (l, f) in fitted {
                if matches!(f, FittedLearner::Constant { .. }) {
                    constant_labels.push(labels[l].clone());
                }
                models[l] = Some(f);
            }
            StrategyModels::Br {
                models: models.into_iter().map(Option::unwrap).collect(),
            }
        }
        Strategy::Clr => {
            let pairs: Vec<(usize, usize)> = (0..m)
                .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
                .collect();
            let has: Vec<Vec<bool>> = labels.iter().map(|l| label_targets(data, l)).collect();
            let pairwise: Vec<(usize, usize, FittedLearner)> = pairs
                .par_iter()
                .enumerate()
                .map(|(pi, &(i, j))| {
                    // Only samples where exactly one of the pair is present.
                    let rows: Vec<usize> = (0..data.len())
                        .filter(|&r| has[i][r] != has[j][r])
                        .collect();
                    let fitted = if rows.is_empty() {
                        FittedLearner::Constant { score: 0.5 }
                    } else {
                        let x = features.select(Axis(0), &rows);
                        let y: Vec<bool> = rows.iter().map(|&r| has[i][r]).collect();
                        fit_learner(&spec_for(learner, 1000 + pi as u64), &x, &y)?
                    };
                    Ok((i, j, fitted))
                })
                .collect::<Result<_>>()?;
            let calibration: Vec<FittedLearner> = labels
                .par_iter()
                .enumerate()
                .map(|(l, label)| {
                    let y = label_targets(data, label);
                    fit_learner(&spec_for(learner, 2000 + l as u64), &features, &y)
                })
                .collect::<Result<_>>()?;
            for (l, f) in calibration.iter().enumerate() {
                if matches!(f, FittedLearner::Constant { .. }) {
                    constant_labels.push(labels[l].clone());
                }
            }
            StrategyModels::Clr {
                pairwise,
                calibration,
            }
        }
        Strategy::Cc => {
            // Canonical sorted-name chain order unless a permutation is
            // given; earlier labels' ground truth is appended to the
            // features of later chain positions.
            let order: Vec<usize> =
                chain_order.map(|o| o.to_vec()).unwrap_or_else(|| (0..m).collect());
            let mut chain = Vec::with_capacity(m);
            let n = data.len();
            let d = features.ncols();
            let mut augmented = Array2::zeros((n, d + m - 1));
            augmented.slice_mut(ndarray::s![.., ..d]).assign(&features);
            for (pos, &l) in order.iter().enumerate() {
                let y = label_targets(data, &labels[l]);
                let x = augmented.slice(ndarray::s![.., ..d + pos]).to_owned();
                let fitted = fit_learner(&spec_for(learner, 3000 + pos as u64), &x, &y)?;
                if matches!(fitted, FittedLearner::Constant { .. }) {
                    constant_labels.push(labels[l].clone());
                }
                if pos + 1 < m {
                    for (r, &truth) in y.iter().enumerate() {
                        augmented[(r, d + pos)] = if truth { 1.0 } else { 0.0 };
                    }
                }
                chain.push(fitted);
            }
            StrategyModels::Cc { order, chain }
        }
    };
    Ok(TransformModel {
        strategy,
        labels,
        learner: learner.clone(),
        models,
        constant_labels,
    })
}

impl TransformModel {
    pub fn model_count(&self) -> usize {
        match &self.models {
            StrategyModels::Br { models } => models.len(),
            StrategyModels::Clr {
                pairwise,
                calibration,
            } => pairwise.len() + calibration.len(),
            StrategyModels::Cc { chain, .. } => chain.len(),
        }
    }
}

/// Predict a label set for one feature vector. Empty outcomes fall back to
/// the single highest-scoring label, so predictions are never empty.
pub fn predict_transform(model: &TransformModel, x: &[f64]) -> Result<LabelSet> {
    let m = model.labels.len();
    match &model.models {
        StrategyModels::Br { models } => {
            let scores: Vec<f64> = models.iter().map(|f| f.score(x)).collect();
            let mut out: LabelSet = model
                .labels
                .iter()
                .zip(&scores)
                .filter(|(_, &s)| s > 0.5)
                .map(|(l, _)| l.clone())
                .collect();
            if out.is_empty() {
                out.insert(model.labels[argmax(&scores)].clone());
            }
            Ok(out)
        }
        StrategyModels::Clr {
            pairwise,
            calibration,
        } => {
            let mut votes = vec![0.0f64; m];
            let mut virtual_votes = 0.0f64;
            for (i, j, f) in pairwise {
                let s = f.score(x);
                if s > 0.5 {
                    votes[*i] += 1.0;
                } else if s < 0.5 {
                    votes[*j] += 1.0;
                } else {
                    votes[*i] += 0.5;
                    votes[*j] += 0.5;
                }
            }
            let calib_scores: Vec<f64> = calibration.iter().map(|f| f.score(x)).collect();
            for (l, &s) in calib_scores.iter().enumerate() {
                if s > 0.5 {
                    votes[l] += 1.0;
                } else if s < 0.5 {
                    virtual_votes += 1.0;
                } else {
                    votes[l] += 0.5;
                    virtual_votes += 0.5;
                }
            }
            let mut out: LabelSet = model
                .labels
                .iter()
                .enumerate()
                .filter(|(l, _)| votes[*l] > virtual_votes)
                .map(|(_, name)| name.clone())
                .collect();
            if out.is_empty() {
                // Highest vote count, then highest calibration score.
                let mut best = 0usize;
                for l in 1..m {
                    if votes[l] > votes[best]
                        || (votes[l] == votes[best] && calib_scores[l] > calib_scores[best])
                    {
                        best = l;
                    }
                }
                out.insert(model.labels[best].clone());
            }
            Ok(out)
        }
        StrategyModels::Cc { order, chain } => {
            let mut augmented = x.to_vec();
            let mut scores = vec![0.0f64; m];
            let mut out = LabelSet::new();
            for (pos, &l) in order.iter().enumerate() {
                let s = chain[pos].score(&augmented);
                scores[l] = s;
                let positive = s > 0.5;
                if positive {
                    out.insert(model.labels[l].clone());
                }
                if pos + 1 < m {
                    augmented.push(if positive { 1.0 } else { 0.0 });
                }
            }
            if out.is_empty() {
                out.insert(model.labels[argmax(&scores)].clone());
            }
            Ok(out)
        }
    }
}

/// Batch prediction over matrix rows.
pub fn predict_transform_batch(model: &TransformModel, x: &Array2<f64>) -> Result<Vec<LabelSet>> {
    x.rows()
        .into_iter()
        .map(|r| predict_transform(model, r.as_slice().unwrap()))
        .collect()
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
