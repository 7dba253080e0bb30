//! Versioned model files.
//!
//! A model file is pretty-printed JSON. Weights are stored as raw IEEE-754
//! binary64 little-endian bytes, base64-armoured, so a load/save round trip is
//! bit-exact. `content_hash` is the SHA-256 of the header fields followed by
//! the raw weight bytes; the model id is derived from it.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::StoreError;
use crate::features::feature_len;
use crate::game::{Color, GameConfig};
use crate::network::ValueNetwork;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

/// Where a model came from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub parents: Vec<String>,
    pub sessions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub id: String,
    pub config: GameConfig,
    pub color: Color,
    pub dims: ModelDims,
    pub games_trained: u64,
    pub lineage: Lineage,
    pub weights: String,
    pub content_hash: String,
}

#[derive(Serialize)]
struct HashedHeader<'a> {
    format_version: u32,
    config: &'a GameConfig,
    color: Color,
    dims: &'a ModelDims,
    games_trained: u64,
    lineage: &'a Lineage,
}

fn weight_bytes(params: &[f64]) -> Vec<u8> {
    params.iter().flat_map(|p| p.to_le_bytes()).collect()
}

fn content_hash(header: &HashedHeader<'_>, weights: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(header).expect("header serializes"));
    hasher.update(weights);
    hex::encode(hasher.finalize())
}

fn model_id(hash: &str) -> String {
    format!("m-{}", &hash[..16])
}

impl ModelFile {
    pub fn from_network(net: &ValueNetwork, lineage: Lineage) -> Self {
        let dims = ModelDims {
            input: net.input_dim(),
            hidden: net.hidden_dim(),
            output: 1,
        };
        let bytes = weight_bytes(net.params());
        let hash = content_hash(
            &HashedHeader {
                format_version: MODEL_FORMAT_VERSION,
                config: &net.config,
                color: net.color,
                dims: &dims,
                games_trained: net.games_trained,
                lineage: &lineage,
            },
            &bytes,
        );
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            id: model_id(&hash),
            config: net.config,
            color: net.color,
            dims,
            games_trained: net.games_trained,
            lineage,
            weights: B64.encode(&bytes),
            content_hash: hash,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }

    /// Parses and fully verifies a model file.
    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| StoreError::Format(e.to_string()))?;
        file.verify()?;
        Ok(file)
    }

    fn decoded_weights(&self) -> Result<Vec<u8>, StoreError> {
        B64.decode(self.weights.as_bytes())
            .map_err(|e| StoreError::Integrity(format!("weights are not valid base64: {e}")))
    }

    pub fn verify(&self) -> Result<(), StoreError> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(StoreError::UnknownVersion(self.format_version));
        }
        let bytes = self.decoded_weights()?;
        let hash = content_hash(
            &HashedHeader {
                format_version: self.format_version,
                config: &self.config,
                color: self.color,
                dims: &self.dims,
                games_trained: self.games_trained,
                lineage: &self.lineage,
            },
            &bytes,
        );
        if hash != self.content_hash {
            return Err(StoreError::Integrity(format!(
                "content hash mismatch: file says {}, contents hash to {hash}",
                self.content_hash
            )));
        }
        if self.id != model_id(&hash) {
            return Err(StoreError::Integrity(format!("model id {} does not match its content", self.id)));
        }
        self.config.validate().map_err(|e| StoreError::Format(e.to_string()))?;
        let input = feature_len(&self.config);
        let expected = ModelDims {
            input,
            hidden: input / 2,
            output: 1,
        };
        if self.dims != expected {
            return Err(StoreError::Dimension(format!(
                "declared dims {:?} do not fit board n={} a={} (expected {:?})",
                self.dims, self.config.n, self.config.a, expected
            )));
        }
        Ok(())
    }

    pub fn to_network(&self) -> Result<ValueNetwork, StoreError> {
        self.verify()?;
        let bytes = self.decoded_weights()?;
        if bytes.len() % 8 != 0 {
            return Err(StoreError::Integrity("weight payload is not a whole number of f64s".into()));
        }
        let params = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        ValueNetwork::from_params(self.config, self.color, params, self.games_trained)
            .map_err(|e| StoreError::Dimension(e.to_string()))
    }
}

/// A network together with the file metadata it was loaded with.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedModel {
    pub file: ModelFile,
    pub net: ValueNetwork,
}

pub fn save_model(path: &Path, net: &ValueNetwork, lineage: Lineage) -> Result<ModelFile, StoreError> {
    let file = ModelFile::from_network(net, lineage);
    write_model_file(path, &file)?;
    Ok(file)
}

pub fn write_model_file(path: &Path, file: &ModelFile) -> Result<(), StoreError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
    }
    // Write-then-rename keeps a crashed save from leaving a torn file.
    let tmp = path.with_extension("model.tmp");
    fs::write(&tmp, file.to_text()).map_err(|e| StoreError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| StoreError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<LoadedModel, StoreError> {
    let text = fs::read_to_string(path).map_err(|e| StoreError::io(path, e))?;
    let file = ModelFile::parse(&text)?;
    let net = file.to_network()?;
    Ok(LoadedModel { file, net })
}
