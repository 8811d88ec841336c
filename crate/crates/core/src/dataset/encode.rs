//! Ordinal encoding of categorical columns over sorted per-column
//! vocabularies, with reusable fitted mappings for test splits.

use super::RawDataset;
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Replace each categorical column by the index of its value in the sorted
/// vocabulary built from this dataset. The fitted vocabularies are stored on
/// the returned dataset so a test split can reuse them.
pub fn encode_features(raw: &RawDataset, categorical_columns: &[String]) -> Result<RawDataset> {
    let mut vocabularies = BTreeMap::new();
    for column in categorical_columns {
        let values = column_values(raw, column)?;
        let vocab: Vec<String> = values
            .iter()
            .cloned()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        vocabularies.insert(column.clone(), vocab);
    }
    apply_encoding(raw, &vocabularies)
}

/// Re-encode with vocabularies fitted elsewhere (e.g. on the training split).
/// A value absent from a reused vocabulary is an encoding error.
pub fn encode_features_with(
    raw: &RawDataset,
    vocabularies: &BTreeMap<String, Vec<String>>,
) -> Result<RawDataset> {
    apply_encoding(raw, vocabularies)
}

/// Fit sorted per-column vocabularies over the union of several datasets, so
/// official train and test splits encode consistently.
pub fn fit_encodings(
    datasets: &[&RawDataset],
    categorical_columns: &[String],
) -> Result<BTreeMap<String, Vec<String>>> {
    let mut vocabularies = BTreeMap::new();
    for column in categorical_columns {
        let mut values = std::collections::BTreeSet::new();
        for raw in datasets {
            values.extend(column_values(raw, column)?);
        }
        vocabularies.insert(column.clone(), values.into_iter().collect());
    }
    Ok(vocabularies)
}

fn column_values(raw: &RawDataset, column: &str) -> Result<Vec<String>> {
    if let Some(values) = raw.text_cells.get(column) {
        return Ok(values.clone());
    }
    let idx = raw
        .feature_names
        .iter()
        .position(|n| n == column)
        .ok_or_else(|| {
            Error::Argument(format!("categorical column {column:?} is not a feature column"))
        })?;
    // Numeric column marked categorical: use its canonical printed values.
    Ok(raw.samples.iter().map(|s| format!("{}", s.features[idx])).collect())
}

fn apply_encoding(
    raw: &RawDataset,
    vocabularies: &BTreeMap<String, Vec<String>>,
) -> Result<RawDataset> {
    let mut out = raw.clone();
    for (column, vocab) in vocabularies {
        let idx = raw
            .feature_names
            .iter()
            .position(|n| n == column)
            .ok_or_else(|| {
                Error::Argument(format!(
                    "categorical column {column:?} is not a feature column"
                ))
            })?;
        let values = column_values(raw, column)?;
        let lookup: BTreeMap<&str, usize> = vocab
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();
        for (sample, value) in out.samples.iter_mut().zip(&values) {
            let code = lookup.get(value.as_str()).ok_or_else(|| Error::Encoding {
                column: column.clone(),
                value: value.clone(),
            })?;
            sample.features[idx] = *code as f64;
        }
        out.text_cells.remove(column);
        out.encodings.insert(column.clone(), vocab.clone());
    }
    Ok(out)
}
