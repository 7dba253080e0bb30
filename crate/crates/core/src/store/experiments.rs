//! Append-only experiment database.
//!
//! Layout under the store root:
//!
//! ```text
//! runs.jsonl     one ExperimentRecord header per line
//! games.jsonl    one GameRow per line, keyed by run id and session label
//! models/        model files named <model id>.model
//! .lock          advisory lock serialising writers across processes
//! ```
//!
//! Aggregates are stored alongside the per-game rows so either can be
//! re-derived and cross-checked.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{write_model_file, LoadedModel, ModelFile};
use super::StoreError;
use crate::runner::{GameRecord, SessionStats};

pub const STORE_FORMAT_VERSION: u32 = 1;

/// Canonical hash of any serialisable value.
pub fn json_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("value serializes");
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionAggregate {
    pub session: String,
    pub stats: SessionStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameRow {
    pub run_id: String,
    pub session: String,
    #[serde(flatten)]
    pub record: GameRecord,
}

/// Header of one experiment run. Per-game rows are passed separately to
/// [`ExperimentStore::record_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub format_version: u32,
    pub run_id: String,
    pub stage: String,
    pub spec: serde_json::Value,
    pub spec_hash: String,
    pub aggregates: Vec<SessionAggregate>,
    pub aggregate_hash: String,
    pub input_models: Vec<String>,
    pub output_models: Vec<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl ExperimentRecord {
    pub fn new(
        run_id: impl Into<String>,
        stage: impl Into<String>,
        spec: serde_json::Value,
        aggregates: Vec<SessionAggregate>,
        started_at: DateTime<Utc>,
    ) -> Self {
        let spec_hash = json_hash(&spec);
        let aggregate_hash = json_hash(&aggregates);
        ExperimentRecord {
            format_version: STORE_FORMAT_VERSION,
            run_id: run_id.into(),
            stage: stage.into(),
            spec,
            spec_hash,
            aggregates,
            aggregate_hash,
            input_models: Vec::new(),
            output_models: Vec::new(),
            started_at,
            finished_at: Utc::now(),
        }
    }

    pub fn with_models(mut self, inputs: Vec<String>, outputs: Vec<String>) -> Self {
        self.input_models = inputs;
        self.output_models = outputs;
        self
    }

    pub fn touches_model(&self, id: &str) -> bool {
        self.input_models.iter().chain(&self.output_models).any(|m| m == id)
    }
}

#[derive(Clone, Debug, Default)]
pub struct QueryFilter {
    pub run_id: Option<String>,
    pub model_id: Option<String>,
    pub stage: Option<String>,
    pub since: Option<DateTime<Utc>>,
    pub until: Option<DateTime<Utc>>,
}

impl QueryFilter {
    fn matches(&self, r: &ExperimentRecord) -> bool {
        self.run_id.as_ref().is_none_or(|id| &r.run_id == id)
            && self.model_id.as_ref().is_none_or(|m| r.touches_model(m))
            && self.stage.as_ref().is_none_or(|s| &r.stage == s)
            && self.since.is_none_or(|t| r.finished_at >= t)
            && self.until.is_none_or(|t| r.finished_at <= t)
    }
}

/// Result of recording a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Recorded {
    Appended,
    /// The run id already existed with the same spec and aggregates.
    AlreadyPresent,
}

#[derive(Debug)]
pub struct ExperimentStore {
    root: PathBuf,
    writer: Mutex<()>,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(StoreError::io(path, e)),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| StoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| StoreError::Format(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}

impl ExperimentStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("models")).map_err(|e| StoreError::io(&root, e))?;
        Ok(ExperimentStore {
            root,
            writer: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn runs_path(&self) -> PathBuf {
        self.root.join("runs.jsonl")
    }

    fn games_path(&self) -> PathBuf {
        self.root.join("games.jsonl")
    }

    pub fn model_path(&self, id: &str) -> PathBuf {
        self.root.join("models").join(format!("{id}.model"))
    }

    fn with_write_lock<T>(&self, f: impl FnOnce() -> Result<T, StoreError>) -> Result<T, StoreError> {
        let _guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let lock_path = self.root.join(".lock");
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(|e| StoreError::io(&lock_path, e))?;
        lock.lock().map_err(|e| StoreError::io(&lock_path, e))?;
        let out = f();
        let _ = lock.unlock();
        out
    }

    /// Stores a model under its id; an existing identical file is kept.
    pub fn put_model(&self, file: &ModelFile) -> Result<PathBuf, StoreError> {
        let path = self.model_path(&file.id);
        self.with_write_lock(|| {
            if !path.exists() {
                write_model_file(&path, file)?;
            }
            Ok(path.clone())
        })
    }

    pub fn has_model(&self, id: &str) -> bool {
        self.model_path(id).exists()
    }

    pub fn get_model(&self, id: &str) -> Result<LoadedModel, StoreError> {
        let path = self.model_path(id);
        if !path.exists() {
            return Err(StoreError::UnknownModel(id.to_string()));
        }
        super::model::load_model(&path)
    }

    /// Appends a run. Re-recording an existing run id is accepted only when
    /// both spec and aggregates match what is stored.
    pub fn record_experiment(&self, record: &ExperimentRecord, games: &[GameRow]) -> Result<Recorded, StoreError> {
        self.with_write_lock(|| {
            let existing: Vec<ExperimentRecord> = read_jsonl(&self.runs_path())?;
            if let Some(prev) = existing.iter().find(|r| r.run_id == record.run_id) {
                if prev.spec_hash != record.spec_hash {
                    return Err(StoreError::DuplicateRun(record.run_id.clone()));
                }
                if prev.aggregate_hash != record.aggregate_hash {
                    return Err(StoreError::NonReproducible(record.run_id.clone()));
                }
                return Ok(Recorded::AlreadyPresent);
            }
            let mut games_out = OpenOptions::new()
                .create(true)
                .append(true)
                .open(self.games_path())
                .map_err(|e| StoreError::io(self.games_path(), e))?;
            let mut buf = String::new();
            for row in games {
                buf.push_str(&serde_json::to_string(row).expect("row serializes"));
                buf.push('\n');
            }
            games_out
                .write_all(buf.as_bytes())
                .and_then(|_| games_out.sync_data())
                .map_err(|e| StoreError::io(self.games_path(), e))?;

            // Header last: a run is visible only once its rows are durable.
            let mut runs_out = OpenOptions::new()
                .create(true)
                .append(true)
                .open(self.runs_path())
                .map_err(|e| StoreError::io(self.runs_path(), e))?;
            let mut line = serde_json::to_string(record).expect("record serializes");
            line.push('\n');
            runs_out
                .write_all(line.as_bytes())
                .and_then(|_| runs_out.sync_data())
                .map_err(|e| StoreError::io(self.runs_path(), e))?;
            Ok(Recorded::Appended)
        })
    }

    pub fn query(&self, filter: &QueryFilter) -> Result<Vec<ExperimentRecord>, StoreError> {
        let all: Vec<ExperimentRecord> = read_jsonl(&self.runs_path())?;
        Ok(all.into_iter().filter(|r| filter.matches(r)).collect())
    }

    pub fn get_run(&self, run_id: &str) -> Result<ExperimentRecord, StoreError> {
        self.query(&QueryFilter {
            run_id: Some(run_id.to_string()),
            ..QueryFilter::default()
        })?
        .into_iter()
        .next()
        .ok_or_else(|| StoreError::UnknownRun(run_id.to_string()))
    }

    /// Per-game rows of a run, in recorded order. Rows of a run whose header
    /// was never written (an interrupted append) are ignored.
    pub fn game_rows(&self, run_id: &str) -> Result<Vec<GameRow>, StoreError> {
        self.get_run(run_id)?;
        let rows: Vec<GameRow> = read_jsonl(&self.games_path())?;
        let mut seen = std::collections::HashMap::<(String, u32), usize>::new();
        let mut out: Vec<GameRow> = Vec::new();
        for row in rows.into_iter().filter(|r| r.run_id == run_id) {
            // A retried append after a crash may repeat rows; keep the last.
            let key = (row.session.clone(), row.record.game_index);
            match seen.get(&key) {
                Some(&i) => out[i] = row,
                None => {
                    seen.insert(key, out.len());
                    out.push(row);
                }
            }
        }
        Ok(out)
    }

    /// Aggregates recomputed from the stored per-game rows.
    pub fn reaggregate(&self, run_id: &str) -> Result<Vec<SessionAggregate>, StoreError> {
        let record = self.get_run(run_id)?;
        let rows = self.game_rows(run_id)?;
        Ok(record
            .aggregates
            .iter()
            .map(|agg| {
                let games: Vec<GameRecord> = rows
                    .iter()
                    .filter(|r| r.session == agg.session)
                    .map(|r| r.record.clone())
                    .collect();
                SessionAggregate {
                    session: agg.session.clone(),
                    stats: SessionStats::from_records(&games),
                }
            })
            .collect())
    }

    /// Model ids referenced by any run that are missing from `models/`.
    pub fn dangling_models(&self) -> Result<Vec<String>, StoreError> {
        let mut missing: Vec<String> = self
            .query(&QueryFilter::default())?
            .iter()
            .flat_map(|r| r.input_models.iter().chain(&r.output_models))
            .filter(|id| !self.has_model(id))
            .cloned()
            .collect();
        missing.sort();
        missing.dedup();
        Ok(missing)
    }
}

pub fn game_rows(run_id: &str, session: &str, records: &[GameRecord]) -> Vec<GameRow> {
    records
        .iter()
        .map(|r| GameRow {
            run_id: run_id.to_string(),
            session: session.to_string(),
            record: r.clone(),
        })
        .collect()
}
