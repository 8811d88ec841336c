//! Experiment reports: per-fold metrics with mean/std summaries, dataset
//! statistics, phase timings and digests, plus side-by-side comparison.

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_unique: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub lcard: f64,
    pub ldiv: usize,
    pub label_vocabulary: Vec<String>,
    /// Exact-duplicate feature vectors shared by train and test.
    pub cross_split_duplicates: usize,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub subsetacc: f64,
    pub hloss: f64,
    pub acc: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricsSummary {
    pub fn mean_std(reports: &[MetricsReport]) -> (MetricsSummary, MetricsSummary) {
        let n = reports.len() as f64;
        let stat = |f: fn(&MetricsReport) -> f64| -> (f64, f64) {
            let mean = reports.iter().map(f).sum::<f64>() / n;
            let var = reports.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        let (subsetacc, subsetacc_std) = stat(|r| r.subsetacc);
        let (hloss, hloss_std) = stat(|r| r.hloss);
        let (acc, acc_std) = stat(|r| r.acc);
        let (precision, precision_std) = stat(|r| r.precision);
        let (recall, recall_std) = stat(|r| r.recall);
        let (f1, f1_std) = stat(|r| r.f1);
        (
            MetricsSummary {
                subsetacc,
                hloss,
                acc,
                precision,
                recall,
                f1,
            },
            MetricsSummary {
                subsetacc: subsetacc_std,
                hloss: hloss_std,
                acc: acc_std,
                precision: precision_std,
                recall: recall_std,
                f1: f1_std,
            },
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub metrics: MetricsReport,
    /// Test label sets the fold's codec could never predict.
    pub unseen_test_sets: usize,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub augment_s: f64,
    pub pretrain_s: f64,
    pub finetune_s: f64,
    pub detect_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: String,
    pub config_digest: String,
    pub dataset_digest: String,
    pub seed: u64,
    pub dataset_stats: DatasetStats,
    pub folds: Vec<FoldReport>,
    pub mean: MetricsSummary,
    pub std: MetricsSummary,
    pub timings: PhaseTimings,
}

impl ExperimentReport {
    pub fn assemble(
        method: String,
        config_digest: String,
        dataset_digest: String,
        seed: u64,
        dataset_stats: DatasetStats,
        folds: Vec<FoldReport>,
        timings: PhaseTimings,
    ) -> Self {
        let metrics: Vec<MetricsReport> = folds.iter().map(|f| f.metrics).collect();
        let (mean, std) = MetricsSummary::mean_std(&metrics);
        ExperimentReport {
            method,
            config_digest,
            dataset_digest,
            seed,
            dataset_stats,
            folds,
            mean,
            std,
            timings,
        }
    }

    /// Digest over everything except the hardware-dependent timings.
    pub fn content_digest(&self) -> String {
        let mut clone = self.clone();
        clone.timings = PhaseTimings::default();
        let json = serde_json::to_string(&clone).expect("report serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        format!("{:x}", hasher.finalize())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput {
                path: path.to_path_buf(),
            });
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub seed: u64,
    pub metrics: MetricsSummary,
    /// Columns where this row holds the best value.
    pub best_in: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub dataset_digest: String,
    pub rows: Vec<ComparisonRow>,
}

const METRIC_COLUMNS: [&str; 6] = ["subsetacc", "hloss", "acc", "precision", "recall", "f1"];

fn metric_value(m: &MetricsSummary, column: &str) -> f64 {
    match column {
        "subsetacc" => m.subsetacc,
        "hloss" => m.hloss,
        "acc" => m.acc,
        "precision" => m.precision,
        "recall" => m.recall,
        _ => m.f1,
    }
}

/// Align reports from the same dataset into one table, flagging the best
/// value per metric column (lower is better only for hloss).
pub fn compare_reports(reports: &[ExperimentReport]) -> Result<ComparisonTable> {
    if reports.len() < 2 {
        return Err(Error::Argument("need at least two reports to compare".into()));
    }
    let dataset_digest = reports[0].dataset_digest.clone();
    for r in &reports[1..] {
        if r.dataset_digest != dataset_digest {
            return Err(Error::DatasetMismatch(
                dataset_digest,
                r.dataset_digest.clone(),
            ));
        }
    }
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            method: r.method.clone(),
            seed: r.seed,
            metrics: r.mean,
            best_in: Vec::new(),
        })
        .collect();
    for column in METRIC_COLUMNS {
        // First row wins exact ties; lower is better only for hloss.
        let mut best = 0usize;
        for i in 1..rows.len() {
            let (candidate, incumbent) = (
                metric_value(&rows[i].metrics, column),
                metric_value(&rows[best].metrics, column),
            );
            let better = if column == "hloss" {
                candidate < incumbent
            } else {
                candidate > incumbent
            };
            if better {
                best = i;
            }
        }
        rows[best].best_in.push(column.to_string());
    }
    Ok(ComparisonTable {
        dataset_digest,
        rows,
    })
}

impl ComparisonTable {
    /// Aligned plain-text rendering; the best value per column is starred.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<28} {:>10} {:>8} {:>8} {:>9} {:>8} {:>8}\n",
            "method", "subsetacc", "hloss", "acc", "precision", "recall", "f1"
        ));
        for row in &self.rows {
            let cell = |col: &str, v: f64| {
                let starred = row.best_in.iter().any(|c| c == col);
                if starred {
                    format!("{v:.4}*")
                } else {
                    format!("{v:.4} ")
                }
            };
            out.push_str(&format!(
                "{:<28} {:>10} {:>8} {:>8} {:>9} {:>8} {:>8}\n",
                row.method,
                cell("subsetacc", row.metrics.subsetacc),
                cell("hloss", row.metrics.hloss),
                cell("acc", row.metrics.acc),
                cell("precision", row.metrics.precision),
                cell("recall", row.metrics.recall),
                cell("f1", row.metrics.f1),
            ));
        }
        out
    }
}
