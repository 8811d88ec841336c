//! CSV corpus ingestion for the supported schemas.

use super::{RawDataset, Sample};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Feature width of the official layout after dropping the identifier and
/// the binary label column.
pub const UNSW_FEATURE_COUNT: usize = 42;

/// The ten base categories of the official corpus.
pub const UNSW_LABELS: [&str; 10] = [
    "Analysis",
    "Backdoor",
    "DoS",
    "Exploits",
    "Fuzzers",
    "Generic",
    "Normal",
    "Reconnaissance",
    "Shellcode",
    "Worms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusSchema {
    /// Official layout: id, 42 features, attack_cat, label.
    UnswNb15,
    /// Per-category static-feature files; the category comes from the file
    /// name (trailing digits stripped, `Ben` meaning `Benign`).
    Andmal2020,
    /// Plain numeric features plus a trailing `label` column, as written by
    /// the synthetic generator.
    SynthRaw,
}

impl std::str::FromStr for CorpusSchema {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unsw-nb15" => Ok(CorpusSchema::UnswNb15),
            "andmal-2020" => Ok(CorpusSchema::Andmal2020),
            "synth-raw" => Ok(CorpusSchema::SynthRaw),
            other => Err(Error::Argument(format!(
                "unknown corpus schema {other:?} (expected unsw-nb15, andmal-2020 or synth-raw)"
            ))),
        }
    }
}

/// Load one or more corpus files into a single [`RawDataset`], preserving
/// file order and row order within each file.
pub fn load_csv_corpus(paths: &[PathBuf], schema: CorpusSchema) -> Result<RawDataset> {
    for p in paths {
        if !p.exists() {
            return Err(Error::MissingInput { path: p.clone() });
        }
    }
    if paths.is_empty() {
        return Err(Error::Argument("no corpus files given".into()));
    }
    match schema {
        CorpusSchema::UnswNb15 => load_unsw(paths),
        CorpusSchema::Andmal2020 => load_andmal(paths),
        CorpusSchema::SynthRaw => load_synth_raw(paths),
    }
}

struct TextTable {
    feature_names: Vec<String>,
    rows: Vec<Vec<String>>,
    labels: Vec<String>,
}

/// Assemble a RawDataset out of textual rows: numeric cells are parsed,
/// columns with any non-numeric cell keep their full text for later ordinal
/// encoding (their feature slots hold NaN until then).
fn assemble(table: TextTable) -> RawDataset {
    let d = table.feature_names.len();
    let mut textual = vec![false; d];
    for row in &table.rows {
        for (c, cell) in row.iter().enumerate() {
            if !textual[c] && cell.trim().parse::<f64>().is_err() {
                textual[c] = true;
            }
        }
    }
    let mut text_cells: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (c, name) in table.feature_names.iter().enumerate() {
        if textual[c] {
            text_cells.insert(
                name.clone(),
                table.rows.iter().map(|r| r[c].trim().to_string()).collect(),
            );
        }
    }
    let samples: Vec<Sample> = table
        .rows
        .iter()
        .zip(table.labels)
        .map(|(row, raw_label)| Sample {
            features: row
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if textual[c] {
                        f64::NAN
                    } else {
                        cell.trim().parse::<f64>().unwrap_or(f64::NAN)
                    }
                })
                .collect(),
            raw_label,
        })
        .collect();
    let vocab: Vec<String> = samples
        .iter()
        .map(|s: &Sample| s.raw_label.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    RawDataset {
        feature_names: table.feature_names,
        samples,
        label_vocabulary: vocab,
        text_cells,
        encodings: BTreeMap::new(),
    }
}

fn load_unsw(paths: &[PathBuf]) -> Result<RawDataset> {
    const EXPECTED_COLS: usize = UNSW_FEATURE_COUNT + 3; // id + features + attack_cat + label
    let mut feature_names: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for path in paths {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let header = reader.headers()?.clone();
        if header.len() != EXPECTED_COLS {
            return Err(Error::Schema {
                path: path.clone(),
                expected: EXPECTED_COLS,
                found: header.len(),
            });
        }
        if feature_names.is_empty() {
            feature_names = header
                .iter()
                .skip(1)
                .take(UNSW_FEATURE_COUNT)
                .map(|s| s.to_string())
                .collect();
        }
        for record in reader.records() {
            let record = record?;
            if record.len() != EXPECTED_COLS {
                return Err(Error::Schema {
                    path: path.clone(),
                    expected: EXPECTED_COLS,
                    found: record.len(),
                });
            }
            let cat = record[EXPECTED_COLS - 2].trim();
            let label = if cat.is_empty() { "Normal".to_string() } else { cat.to_string() };
            if !UNSW_LABELS.contains(&label.as_str()) {
                return Err(Error::UnknownLabel {
                    label,
                    vocabulary: UNSW_LABELS.iter().map(|s| s.to_string()).collect(),
                });
            }
            rows.push(
                record
                    .iter()
                    .skip(1)
                    .take(UNSW_FEATURE_COUNT)
                    .map(|s| s.to_string())
                    .collect(),
            );
            labels.push(label);
        }
    }
    Ok(assemble(TextTable {
        feature_names,
        rows,
        labels,
    }))
}

/// `Ben0.csv` -> `Benign`, `Trojan_SMS3.csv` -> `Trojan_SMS`, etc.
fn andmal_label_for(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("unknown");
    let trimmed = stem.trim_end_matches(|c: char| c.is_ascii_digit());
    let base = if trimmed.is_empty() { stem } else { trimmed };
    if base.eq_ignore_ascii_case("ben") {
        "Benign".to_string()
    } else {
        base.to_string()
    }
}

fn load_andmal(paths: &[PathBuf]) -> Result<RawDataset> {
    let mut feature_names: Vec<String> = Vec::new();
    let mut expected = 0usize;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    for path in paths {
        let label = andmal_label_for(path);
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let header = reader.headers()?.clone();
        // Leading pandas-style index columns carry empty or Unnamed headers.
        let skip = header
            .iter()
            .take_while(|h| h.is_empty() || h.starts_with("Unnamed"))
            .count();
        let width = header.len() - skip;
        if expected == 0 {
            expected = width;
            feature_names = header.iter().skip(skip).map(|s| s.to_string()).collect();
        } else if width != expected {
            return Err(Error::Schema {
                path: path.clone(),
                expected,
                found: width,
            });
        }
        for record in reader.records() {
            let record = record?;
            if record.len() - skip != expected {
                return Err(Error::Schema {
                    path: path.clone(),
                    expected,
                    found: record.len() - skip,
                });
            }
            rows.push(record.iter().skip(skip).map(|s| s.to_string()).collect());
            labels.push(label.clone());
        }
    }
    Ok(assemble(TextTable {
        feature_names,
        rows,
        labels,
    }))
}

fn load_synth_raw(paths: &[PathBuf]) -> Result<RawDataset> {
    let mut feature_names: Vec<String> = Vec::new();
    let mut expected = 0usize;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for path in paths {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let header = reader.headers()?.clone();
        if header.is_empty() || &header[header.len() - 1] != "label" {
            return Err(Error::Data(format!(
                "{}: synth-raw files end with a 'label' column",
                path.display()
            )));
        }
        let width = header.len();
        if expected == 0 {
            expected = width;
            feature_names = header.iter().take(width - 1).map(|s| s.to_string()).collect();
        } else if width != expected {
            return Err(Error::Schema {
                path: path.clone(),
                expected,
                found: width,
            });
        }
        for record in reader.records() {
            let record = record?;
            if record.len() != expected {
                return Err(Error::Schema {
                    path: path.clone(),
                    expected,
                    found: record.len(),
                });
            }
            rows.push(record.iter().take(expected - 1).map(|s| s.to_string()).collect());
            labels.push(record[expected - 1].to_string());
        }
    }
    Ok(assemble(TextTable {
        feature_names,
        rows,
        labels,
    }))
}
