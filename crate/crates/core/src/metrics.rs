//! Example-based multi-label evaluation and dataset statistics.
//!
//! Subsetacc is the exact-match rate, Hloss the mean cardinality of the
//! symmetric difference (not normalized by the label count), Acc the mean
//! Jaccard overlap, and P/R are example-averaged precision/recall with F1
//! taken over the aggregated P and R.

use crate::dataset::{LabelSet, MultiLabelDataset};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub subsetacc: f64,
    pub hloss: f64,
    pub acc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n: usize,
}

/// Mean label-set size over unique samples.
pub fn lcard(data: &MultiLabelDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Argument("lcard of an empty dataset".into()));
    }
    let total: usize = data.samples.iter().map(|s| s.multiplicity.len()).sum();
    Ok(total as f64 / data.len() as f64)
}

/// Number of distinct label sets.
pub fn ldiv(data: &MultiLabelDataset) -> Result<usize> {
    if data.is_empty() {
        return Err(Error::Argument("ldiv of an empty dataset".into()));
    }
    let distinct: BTreeSet<Vec<&String>> = data
        .samples
        .iter()
        .map(|s| s.multiplicity.keys().collect())
        .collect();
    Ok(distinct.len())
}

/// Evaluate predicted label sets against the truth.
pub fn evaluate(predictions: &[LabelSet], truths: &[LabelSet]) -> Result<MetricsReport> {
    if predictions.len() != truths.len() {
        return Err(Error::Argument(format!(
            "got {} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Argument("nothing to evaluate".into()));
    }
    let n = predictions.len() as f64;
    let mut exact = 0.0;
    let mut sym_diff = 0.0;
    let mut jaccard = 0.0;
    let mut precision = 0.0;
    let mut recall = 0.0;
    for (i, (h, y)) in predictions.iter().zip(truths).enumerate() {
        if h.is_empty() {
            return Err(Error::Argument(format!(
                "prediction {i} is empty; callers must apply their fallback first"
            )));
        }
        if y.is_empty() {
            return Err(Error::Argument(format!("truth set {i} is empty")));
        }
        let inter = h.intersection(y).count() as f64;
        let union = h.union(y).count() as f64;
        if h == y {
            exact += 1.0;
        }
        sym_diff += union - inter;
        jaccard += inter / union;
        precision += inter / h.len() as f64;
        recall += inter / y.len() as f64;
    }
    let p = precision / n;
    let r = recall / n;
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    Ok(MetricsReport {
        subsetacc: exact / n,
        hloss: sym_diff / n,
        acc: jaccard / n,
        precision: p,
        recall: r,
        f1,
        n: predictions.len(),
    })
}
