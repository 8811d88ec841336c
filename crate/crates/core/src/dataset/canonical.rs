//! Canonical multi-label dataset file: one CSV record per unique sample
//! (feature values, semicolon-joined sorted labels, aligned per-label counts,
//! provenance) plus a JSON sidecar carrying vocabulary, scaler and encoding
//! metadata.

use super::{MultiLabelDataset, MultiLabeledSample, Provenance, ScalerModel};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SidecarMeta {
    pub label_vocabulary: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<ScalerModel>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub encodings: BTreeMap<String, Vec<String>>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

fn provenance_str(p: &Provenance) -> String {
    match p {
        Provenance::Real => "real".to_string(),
        Provenance::Generated { category } => format!("generated:{category}"),
    }
}

fn parse_provenance(s: &str) -> Result<Provenance> {
    if s == "real" {
        Ok(Provenance::Real)
    } else if let Some(category) = s.strip_prefix("generated:") {
        Ok(Provenance::Generated {
            category: category.to_string(),
        })
    } else {
        Err(Error::Data(format!("unknown provenance {s:?}")))
    }
}

pub fn write_canonical(data: &MultiLabelDataset, path: &Path, meta: &SidecarMeta) -> Result<()> {
    let d = data.dim();
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..d).map(|i| format!("f{i}")).collect();
    header.extend(["labels".into(), "counts".into(), "provenance".into()]);
    writer.write_record(&header)?;
    for sample in &data.samples {
        let mut record: Vec<String> = sample.features.iter().map(|v| format!("{v}")).collect();
        let labels: Vec<&str> = sample.multiplicity.keys().map(|s| s.as_str()).collect();
        let counts: Vec<String> = sample.multiplicity.values().map(|c| c.to_string()).collect();
        record.push(labels.join(";"));
        record.push(counts.join(";"));
        record.push(provenance_str(&sample.provenance));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn read_canonical(path: &Path) -> Result<(MultiLabelDataset, SidecarMeta)> {
    if !path.exists() {
        return Err(Error::MissingInput {
            path: path.to_path_buf(),
        });
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header = reader.headers()?.clone();
    if header.len() < 4 {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            expected: 4,
            found: header.len(),
        });
    }
    let d = header.len() - 3;
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                expected: header.len(),
                found: record.len(),
            });
        }
        let features: Vec<f64> = (0..d)
            .map(|i| {
                record[i]
                    .parse::<f64>()
                    .map_err(|_| Error::Data(format!("bad feature value {:?}", &record[i])))
            })
            .collect::<Result<_>>()?;
        let labels: Vec<&str> = record[d].split(';').filter(|s| !s.is_empty()).collect();
        let counts: Vec<u32> = record[d + 1]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<u32>().map_err(|_| Error::Data(format!("bad count {s:?}"))))
            .collect::<Result<_>>()?;
        if labels.is_empty() || labels.len() != counts.len() {
            return Err(Error::Data(format!(
                "labels/counts mismatch in record: {:?}",
                record
            )));
        }
        let multiplicity: BTreeMap<String, u32> = labels
            .iter()
            .map(|s| s.to_string())
            .zip(counts.iter().copied())
            .collect();
        samples.push(MultiLabeledSample {
            features,
            multiplicity,
            provenance: parse_provenance(&record[d + 2])?,
        });
    }
    let sidecar = sidecar_path(path);
    let meta: SidecarMeta = if sidecar.exists() {
        serde_json::from_str(&std::fs::read_to_string(sidecar)?)?
    } else {
        let vocab: std::collections::BTreeSet<String> = samples
            .iter()
            .flat_map(|s| s.multiplicity.keys().cloned())
            .collect();
        SidecarMeta {
            label_vocabulary: vocab.into_iter().collect(),
            scaler: None,
            encodings: BTreeMap::new(),
        }
    };
    Ok((
        MultiLabelDataset {
            samples,
            label_vocabulary: meta.label_vocabulary.clone(),
        },
        meta,
    ))
}
