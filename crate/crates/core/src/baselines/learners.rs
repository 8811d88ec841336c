//! Small deterministic binary learners behind the problem-transformation
//! strategies. Each fitted learner exposes one probability-like score where
//! anything above 0.5 means positive.

use crate::error::{Error, Result};
use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    NaiveBayes,
    LogisticRegression,
    DecisionTree,
    RandomForest,
    Svm,
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive-bayes" | "bayes" => Ok(LearnerKind::NaiveBayes),
            "logistic-regression" | "lr" => Ok(LearnerKind::LogisticRegression),
            "decision-tree" | "dt" => Ok(LearnerKind::DecisionTree),
            "random-forest" | "rf" => Ok(LearnerKind::RandomForest),
            "svm" => Ok(LearnerKind::Svm),
            other => Err(Error::Argument(format!("unknown base learner {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseLearnerSpec {
    pub kind: LearnerKind,
    /// Overrides for the per-kind defaults; resolved values are recorded in
    /// the run manifest.
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, f64>,
    pub seed: u64,
}

impl BaseLearnerSpec {
    pub fn new(kind: LearnerKind, seed: u64) -> Self {
        Self {
            kind,
            hyperparameters: BTreeMap::new(),
            seed,
        }
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.hyperparameters.get(key).copied().unwrap_or(default)
    }

    /// The hyperparameters actually used, defaults filled in.
    pub fn resolved(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        match self.kind {
            LearnerKind::NaiveBayes => {
                out.insert("var_smoothing".into(), self.get("var_smoothing", 1e-9));
            }
            LearnerKind::LogisticRegression => {
                out.insert("lr".into(), self.get("lr", 0.5));
                out.insert("iters".into(), self.get("iters", 300.0));
                out.insert("l2".into(), self.get("l2", 1e-4));
            }
            LearnerKind::DecisionTree => {
                out.insert("max_depth".into(), self.get("max_depth", 24.0));
                out.insert("min_samples_split".into(), self.get("min_samples_split", 2.0));
            }
            LearnerKind::RandomForest => {
                out.insert("n_trees".into(), self.get("n_trees", 30.0));
                out.insert("max_depth".into(), self.get("max_depth", 24.0));
                out.insert("min_samples_split".into(), self.get("min_samples_split", 2.0));
            }
            LearnerKind::Svm => {
                out.insert("lr".into(), self.get("lr", 0.5));
                out.insert("iters".into(), self.get("iters", 300.0));
                out.insert("l2".into(), self.get("l2", 1e-3));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FittedLearner {
    /// Degenerate single-class target, or a stub for tests.
    Constant { score: f64 },
    NaiveBayes(GaussianNb),
    Logistic(LinearModel),
    Tree(TreeNode),
    Forest(Vec<TreeNode>),
    Svm(LinearModel),
}

impl FittedLearner {
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            FittedLearner::Constant { score } => *score,
            FittedLearner::NaiveBayes(nb) => nb.score(x),
            FittedLearner::Logistic(m) => sigmoid(m.margin(x)),
            FittedLearner::Tree(t) => t.score(x),
            FittedLearner::Forest(trees) => {
                trees.iter().map(|t| t.score(x)).sum::<f64>() / trees.len() as f64
            }
            FittedLearner::Svm(m) => sigmoid(m.margin(x)),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Fit the requested learner; a single-class target collapses to a constant
/// predictor, which the caller is expected to log.
pub fn fit_learner(spec: &BaseLearnerSpec, x: &Array2<f64>, y: &[bool]) -> Result<FittedLearner> {
    if x.nrows() != y.len() || y.is_empty() {
        return Err(Error::Argument("features and targets must align and be non-empty".into()));
    }
    let positives = y.iter().filter(|&&b| b).count();
    if positives == 0 {
        return Ok(FittedLearner::Constant { score: 0.0 });
    }
    if positives == y.len() {
        return Ok(FittedLearner::Constant { score: 1.0 });
    }
    match spec.kind {
        LearnerKind::NaiveBayes => Ok(FittedLearner::NaiveBayes(GaussianNb::fit(
            x,
            y,
            spec.get("var_smoothing", 1e-9),
        ))),
        LearnerKind::LogisticRegression => Ok(FittedLearner::Logistic(LinearModel::fit_logistic(
            x,
            y,
            spec.get("lr", 0.5),
            spec.get("iters", 300.0) as usize,
            spec.get("l2", 1e-4),
        ))),
        LearnerKind::DecisionTree => Ok(FittedLearner::Tree(grow_tree(
            x,
            y,
            &(0..x.ncols()).collect::<Vec<_>>(),
            spec.get("max_depth", 24.0) as usize,
            spec.get("min_samples_split", 2.0) as usize,
        ))),
        LearnerKind::RandomForest => {
            let n_trees = spec.get("n_trees", 30.0) as usize;
            let max_depth = spec.get("max_depth", 24.0) as usize;
            let min_split = spec.get("min_samples_split", 2.0) as usize;
            let d = x.ncols();
            let n_feats = ((d as f64).sqrt().ceil() as usize).clamp(1, d);
            let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
            let trees = (0..n_trees)
                .map(|_| {
                    let rows: Vec<usize> =
                        (0..x.nrows()).map(|_| rng.gen_range(0..x.nrows())).collect();
                    let mut features: Vec<usize> = (0..d).collect();
                    for i in (1..features.len()).rev() {
                        features.swap(i, rng.gen_range(0..=i));
                    }
                    features.truncate(n_feats);
                    features.sort_unstable();
                    let xb = x.select(ndarray::Axis(0), &rows);
                    let yb: Vec<bool> = rows.iter().map(|&r| y[r]).collect();
                    grow_tree(&xb, &yb, &features, max_depth, min_split)
                })
                .collect();
            Ok(FittedLearner::Forest(trees))
        }
        LearnerKind::Svm => Ok(FittedLearner::Svm(LinearModel::fit_hinge(
            x,
            y,
            spec.get("lr", 0.5),
            spec.get("iters", 300.0) as usize,
            spec.get("l2", 1e-3),
        ))),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianNb {
    prior_pos: f64,
    mean_pos: Vec<f64>,
    var_pos: Vec<f64>,
    mean_neg: Vec<f64>,
    var_neg: Vec<f64>,
}

impl GaussianNb {
    fn fit(x: &Array2<f64>, y: &[bool], smoothing: f64) -> Self {
        let d = x.ncols();
        let stats = |flag: bool| {
            let rows: Vec<ArrayView1<f64>> = x
                .rows()
                .into_iter()
                .zip(y)
                .filter(|(_, &b)| b == flag)
                .map(|(r, _)| r)
                .collect();
            let n = rows.len() as f64;
            let mut mean = vec![0.0; d];
            for r in &rows {
                for (j, &v) in r.iter().enumerate() {
                    mean[j] += v;
                }
            }
            for m in &mut mean {
                *m /= n;
            }
            let mut var = vec![0.0; d];
            for r in &rows {
                for (j, &v) in r.iter().enumerate() {
                    var[j] += (v - mean[j]) * (v - mean[j]);
                }
            }
            for v in &mut var {
                *v = *v / n + smoothing;
            }
            (mean, var, n)
        };
        let (mean_pos, var_pos, n_pos) = stats(true);
        let (mean_neg, var_neg, n_neg) = stats(false);
        GaussianNb {
            prior_pos: n_pos / (n_pos + n_neg),
            mean_pos,
            var_pos,
            mean_neg,
            var_neg,
        }
    }

    fn score(&self, x: &[f64]) -> f64 {
        let log_lik = |mean: &[f64], var: &[f64]| {
            x.iter()
                .zip(mean.iter().zip(var))
                .map(|(&v, (&m, &s2))| {
                    -0.5 * ((v - m) * (v - m) / s2 + s2.ln() + (2.0 * std::f64::consts::PI).ln())
                })
                .sum::<f64>()
        };
        let lp = self.prior_pos.ln() + log_lik(&self.mean_pos, &self.var_pos);
        let ln = (1.0 - self.prior_pos).ln() + log_lik(&self.mean_neg, &self.var_neg);
        let m = lp.max(ln);
        let zp = (lp - m).exp();
        let zn = (ln - m).exp();
        zp / (zp + zn)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    fn fit_logistic(x: &Array2<f64>, y: &[bool], lr: f64, iters: usize, l2: f64) -> Self {
        let (n, d) = x.dim();
        let mut model = LinearModel {
            weights: vec![0.0; d],
            bias: 0.0,
        };
        for _ in 0..iters {
            let mut gw = vec![0.0; d];
            let mut gb = 0.0;
            for (row, &label) in x.rows().into_iter().zip(y) {
                let t = if label { 1.0 } else { 0.0 };
                let err = sigmoid(model.margin(row.as_slice().unwrap())) - t;
                for (j, &v) in row.iter().enumerate() {
                    gw[j] += err * v;
                }
                gb += err;
            }
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= lr * (g / n as f64 + l2 * *w);
            }
            model.bias -= lr * gb / n as f64;
        }
        model
    }

    fn fit_hinge(x: &Array2<f64>, y: &[bool], lr: f64, iters: usize, l2: f64) -> Self {
        let (n, d) = x.dim();
        let mut model = LinearModel {
            weights: vec![0.0; d],
            bias: 0.0,
        };
        for _ in 0..iters {
            let mut gw = vec![0.0; d];
            let mut gb = 0.0;
            for (row, &label) in x.rows().into_iter().zip(y) {
                let t = if label { 1.0 } else { -1.0 };
                if t * model.margin(row.as_slice().unwrap()) < 1.0 {
                    for (j, &v) in row.iter().enumerate() {
                        gw[j] -= t * v;
                    }
                    gb -= t;
                }
            }
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= lr * (g / n as f64 + l2 * *w);
            }
            model.bias -= lr * gb / n as f64;
        }
        model
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        score: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { score } => *score,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.score(x)
                } else {
                    right.score(x)
                }
            }
        }
    }
}

fn gini(pos: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

/// CART over the given feature subset; ties resolved by lowest feature
/// index then lowest threshold so trees are identical across runs.
fn grow_tree(
    x: &Array2<f64>,
    y: &[bool],
    features: &[usize],
    max_depth: usize,
    min_split: usize,
) -> TreeNode {
    let indices: Vec<usize> = (0..y.len()).collect();
    grow_node(x, y, &indices, features, max_depth, min_split)
}

fn grow_node(
    x: &Array2<f64>,
    y: &[bool],
    indices: &[usize],
    features: &[usize],
    depth_left: usize,
    min_split: usize,
) -> TreeNode {
    let total = indices.len() as f64;
    let pos = indices.iter().filter(|&&i| y[i]).count() as f64;
    let leaf = TreeNode::Leaf { score: pos / total };
    if pos == 0.0 || pos == total || depth_left == 0 || indices.len() < min_split {
        return leaf;
    }

    let mut best: Option<(f64, usize, f64)> = None; // (impurity, feature, threshold)
    for &f in features {
        let mut values: Vec<(f64, bool)> = indices.iter().map(|&i| (x[(i, f)], y[i])).collect();
        values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut pos_left = 0.0;
        for k in 0..values.len() - 1 {
            if values[k].1 {
                pos_left += 1.0;
            }
            if values[k].0 == values[k + 1].0 {
                continue;
            }
            let left_n = (k + 1) as f64;
            let right_n = total - left_n;
            let impurity = (left_n * gini(pos_left, left_n)
                + right_n * gini(pos - pos_left, right_n))
                / total;
            let threshold = (values[k].0 + values[k + 1].0) / 2.0;
            let candidate = (impurity, f, threshold);
            let better = match &best {
                None => true,
                Some((bi, bf, bt)) => {
                    impurity < *bi - 1e-15
                        || ((impurity - *bi).abs() <= 1e-15 && (f, threshold) < (*bf, *bt))
                }
            };
            if better {
                best = Some(candidate);
            }
        }
    }

    match best {
        None => leaf,
        Some((_, feature, threshold)) => {
            let (mut left_idx, mut right_idx) = (Vec::new(), Vec::new());
            for &i in indices {
                if x[(i, feature)] <= threshold {
                    left_idx.push(i);
                } else {
                    right_idx.push(i);
                }
            }
            if left_idx.is_empty() || right_idx.is_empty() {
                return leaf;
            }
            TreeNode::Split {
                feature,
                threshold,
                left: Box::new(grow_node(x, y, &left_idx, features, depth_left - 1, min_split)),
                right: Box::new(grow_node(x, y, &right_idx, features, depth_left - 1, min_split)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn xor_free_data() -> (Array2<f64>, Vec<bool>) {
        // Linearly separable: positive iff x0 > 1.
        let x = array![
            [0.0, 0.3],
            [0.5, 0.9],
            [0.8, 0.1],
            [1.5, 0.4],
            [2.0, 0.8],
            [2.5, 0.2]
        ];
        let y = vec![false, false, false, true, true, true];
        (x, y)
    }

    #[test]
    fn every_learner_separates_a_linear_problem() {
        let (x, y) = xor_free_data();
        for kind in [
            LearnerKind::NaiveBayes,
            LearnerKind::LogisticRegression,
            LearnerKind::DecisionTree,
            LearnerKind::RandomForest,
            LearnerKind::Svm,
        ] {
            let spec = BaseLearnerSpec::new(kind, 3);
            let model = fit_learner(&spec, &x, &y).unwrap();
            for (row, &label) in x.rows().into_iter().zip(&y) {
                let s = model.score(row.as_slice().unwrap());
                assert_eq!(s > 0.5, label, "{kind:?} misclassified {row:?} ({s})");
            }
        }
    }

    #[test]
    fn single_class_targets_collapse_to_constants() {
        let (x, _) = xor_free_data();
        let spec = BaseLearnerSpec::new(LearnerKind::DecisionTree, 0);
        let all_pos = fit_learner(&spec, &x, &[true; 6]).unwrap();
        assert!(matches!(all_pos, FittedLearner::Constant { score } if score == 1.0));
        let all_neg = fit_learner(&spec, &x, &[false; 6]).unwrap();
        assert!(matches!(all_neg, FittedLearner::Constant { score } if score == 0.0));
    }

    #[test]
    fn tree_fitting_is_deterministic() {
        let (x, y) = xor_free_data();
        let spec = BaseLearnerSpec::new(LearnerKind::RandomForest, 11);
        let a = serde_json::to_string(&fit_learner(&spec, &x, &y).unwrap()).unwrap();
        let b = serde_json::to_string(&fit_learner(&spec, &x, &y).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tree_splits_on_the_informative_feature() {
        let (x, y) = xor_free_data();
        let spec = BaseLearnerSpec::new(LearnerKind::DecisionTree, 0);
        let model = fit_learner(&spec, &x, &y).unwrap();
        match model {
            FittedLearner::Tree(TreeNode::Split { feature, .. }) => assert_eq!(feature, 0),
            other => panic!("expected a split, got {other:?}"),
        }
    }

    #[test]
    fn resolved_hyperparameters_fill_defaults() {
        let spec = BaseLearnerSpec::new(LearnerKind::RandomForest, 0);
        let resolved = spec.resolved();
        assert_eq!(resolved["n_trees"], 30.0);
        let mut custom = spec.clone();
        custom.hyperparameters.insert("n_trees".into(), 5.0);
        assert_eq!(custom.resolved()["n_trees"], 5.0);
    }
}
