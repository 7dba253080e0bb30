//! Model files, the experiment database and run manifests.

pub mod experiments;
pub mod manifest;
pub mod model;

use std::path::{Path, PathBuf};

pub use experiments::{
    game_rows, json_hash, ExperimentRecord, ExperimentStore, GameRow, QueryFilter, Recorded, SessionAggregate,
};
pub use manifest::{ManifestError, ManifestInput, RunManifest, Stage};
pub use model::{load_model, save_model, write_model_file, Lineage, LoadedModel, ModelDims, ModelFile, MODEL_FORMAT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file: {0}")]
    Format(String),
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("unknown format version {0}")]
    UnknownVersion(u32),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown model id {0}")]
    UnknownModel(String),
    #[error("unknown run id {0}")]
    UnknownRun(String),
    #[error("run id {0} already recorded with a different spec")]
    DuplicateRun(String),
    #[error("run id {0} re-run with the same spec produced different aggregates")]
    NonReproducible(String),
}

impl StoreError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }
}
