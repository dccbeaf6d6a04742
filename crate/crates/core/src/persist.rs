//! Versioned, checksummed JSON model files.
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "checksum": "<sha256 hex of the compact JSON of `model`>",
//!   "model": { "kind": "knn" | "hmm", ... }
//! }
//! ```
//!
//! The checksum is taken over `model` re-serialised compactly with keys in
//! sorted order, so whitespace changes to the file do not invalidate it.

use crate::error::{Error, Result};
use crate::features::FeatureCombo;
use crate::hmm::HmmBank;
use crate::knn::KnnModel;
use crate::pipeline::PrepConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnArtifact {
    pub combo: FeatureCombo,
    pub bands: usize,
    pub feature_names: Vec<String>,
    pub prep: PrepConfig,
    pub model: KnnModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmArtifact {
    pub combo: FeatureCombo,
    pub prep: PrepConfig,
    pub bank: HmmBank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StoredModel {
    Knn(KnnArtifact),
    Hmm(HmmArtifact),
}

impl StoredModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            StoredModel::Knn(k) => {
                k.model.validate()?;
                if k.feature_names.len() != k.model.dim() {
                    return Err(Error::InvalidModel("feature names do not match model dimension".into()));
                }
                Ok(())
            }
            StoredModel::Hmm(h) => h.bank.validate(),
        }
    }

    pub fn combo(&self) -> FeatureCombo {
        match self {
            StoredModel::Knn(k) => k.combo,
            StoredModel::Hmm(h) => h.combo,
        }
    }
}

fn checksum(model: &Value) -> String {
    let canonical = serde_json::to_string(model).expect("JSON values serialise");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn encode_model(model: &StoredModel) -> Result<String> {
    let value = serde_json::to_value(model)?;
    let envelope = serde_json::json!({
        "format_version": MODEL_FORMAT_VERSION,
        "checksum": checksum(&value),
        "model": value,
    });
    Ok(serde_json::to_string_pretty(&envelope)?)
}

pub fn decode_model(data: &[u8]) -> Result<StoredModel> {
    let envelope: Value = serde_json::from_slice(data)?;
    let obj = envelope
        .as_object()
        .ok_or_else(|| Error::Parse("model file is not a JSON object".into()))?;
    let version = obj
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Parse("missing format_version".into()))?;
    if version != u64::from(MODEL_FORMAT_VERSION) {
        return Err(Error::SchemaVersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let stored_sum = obj
        .get("checksum")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Parse("missing checksum".into()))?;
    let model = obj.get("model").ok_or_else(|| Error::Parse("missing model".into()))?;
    if checksum(model) != stored_sum {
        return Err(Error::ChecksumMismatch);
    }
    let model: StoredModel = serde_json::from_value(model.clone())?;
    model.validate()?;
    Ok(model)
}

pub fn save_model(model: &StoredModel, path: &Path) -> Result<()> {
    fs::write(path, encode_model(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<StoredModel> {
    decode_model(&fs::read(path)?)
}
