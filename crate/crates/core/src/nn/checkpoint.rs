//! Self-describing checkpoint container with a content digest.

use super::{MlpSpec, ModelParams};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub spec: MlpSpec,
    pub params: ModelParams,
    pub content_digest: String,
}

/// Digest over the raw little-endian bytes of every weight and bias, in
/// layer order, so equal parameters always hash equally regardless of the
/// serialization dialect.
pub fn params_digest(spec: &MlpSpec, params: &ModelParams) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("{:?}|{:?}", spec.layer_widths, spec.output).as_bytes());
    for w in &params.weights {
        for v in w.iter() {
            hasher.update(v.to_le_bytes());
        }
    }
    for b in &params.biases {
        for v in b.iter() {
            hasher.update(v.to_le_bytes());
        }
    }
    format!("{:x}", hasher.finalize())
}

impl Checkpoint {
    pub fn new(spec: MlpSpec, params: ModelParams) -> Self {
        let content_digest = params_digest(&spec, &params);
        Self {
            format_version: CHECKPOINT_VERSION,
            spec,
            params,
            content_digest,
        }
    }

    pub fn verify(&self) -> Result<()> {
        if self.format_version > CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: self.format_version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if !self.params.matches(&self.spec) {
            return Err(Error::Corrupt(
                "parameter shapes do not match the stored spec".into(),
            ));
        }
        let digest = params_digest(&self.spec, &self.params);
        if digest != self.content_digest {
            return Err(Error::Corrupt(format!(
                "digest mismatch: stored {}, recomputed {}",
                self.content_digest, digest
            )));
        }
        Ok(())
    }
}

pub fn save_checkpoint(spec: &MlpSpec, params: &ModelParams, path: &Path) -> Result<Checkpoint> {
    let ckpt = Checkpoint::new(spec.clone(), params.clone());
    let json = serde_json::to_string(&ckpt)?;
    fs::write(path, json)?;
    Ok(ckpt)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::MissingInput {
            path: path.to_path_buf(),
        });
    }
    let raw = fs::read_to_string(path)?;
    let ckpt: Checkpoint =
        serde_json::from_str(&raw).map_err(|e| Error::Corrupt(format!("unreadable checkpoint: {e}")))?;
    ckpt.verify()?;
    Ok(ckpt)
}
