//! Label PowerSet codec: a bijection between the observed label sets and
//! dense class indices, assigned in lexicographic order of the sorted-label
//! canonical keys so the mapping is identical across runs.

use crate::dataset::{LabelSet, MultiLabelDataset};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "Vec<Vec<String>>", into = "Vec<Vec<String>>")]
pub struct PowersetCodec {
    classes: Vec<Vec<String>>,
    index: HashMap<Vec<String>, usize>,
}

impl From<Vec<Vec<String>>> for PowersetCodec {
    fn from(classes: Vec<Vec<String>>) -> Self {
        Self::from_classes(classes)
    }
}

impl From<PowersetCodec> for Vec<Vec<String>> {
    fn from(codec: PowersetCodec) -> Self {
        codec.classes
    }
}

fn canonical_key(labels: &LabelSet) -> Vec<String> {
    labels.iter().cloned().collect()
}

impl PowersetCodec {
    /// Register every distinct label set of the dataset.
    pub fn fit(data: &MultiLabelDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Argument("cannot fit a codec on an empty dataset".into()));
        }
        let mut classes: Vec<Vec<String>> = data
            .samples
            .iter()
            .map(|s| canonical_key(&s.labels()))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        classes.sort();
        Ok(Self::from_classes(classes))
    }

    fn from_classes(classes: Vec<Vec<String>>) -> Self {
        let index = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        Self { classes, index }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn encode(&self, labels: &LabelSet) -> Result<usize> {
        self.index
            .get(&canonical_key(labels))
            .copied()
            .ok_or_else(|| Error::UnknownClass(canonical_key(labels)))
    }

    pub fn decode(&self, id: usize) -> Result<LabelSet> {
        self.classes
            .get(id)
            .map(|c| c.iter().cloned().collect())
            .ok_or(Error::ClassRange {
                id,
                len: self.classes.len(),
            })
    }

    pub fn contains(&self, labels: &LabelSet) -> bool {
        self.index.contains_key(&canonical_key(labels))
    }

    /// Label sets in `data` that the codec cannot ever predict.
    pub fn unseen_sets(&self, data: &MultiLabelDataset) -> usize {
        data.samples.iter().filter(|s| !self.contains(&s.labels())).count()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.classes)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput {
                path: path.to_path_buf(),
            });
        }
        let classes: Vec<Vec<String>> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok(Self::from_classes(classes))
    }
}
