//! Session registry and on-disk checkpoints.
//!
//! Each session lives in `<data>/sessions/<id>/`:
//!
//! ```text
//! session.json               spec, finished games, transcripts, model ids
//! game-000-white.model       networks before the first game
//! game-<k>-<color>.model     networks after k completed games
//! ```
//!
//! `session.json` is rewritten (write-then-rename) after the model files of a
//! game boundary are on disk, so recovery always finds the networks it
//! names. A finished session is also recorded in the experiment store under
//! run id `hc-<id>`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock, TryLockError};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use rlgame::hc::{HcCheckpoint, HcError, HcSession, HcSpec};
use rlgame::store::{
    game_rows, load_model, save_model, write_model_file, ExperimentRecord, ExperimentStore, Lineage, LoadedModel, ModelFile,
    SessionAggregate, StoreError,
};
use rlgame::{init_network, Color, GameConfig, IllegalMove, Move, NetworkPair, TdParams};

use crate::view::{BoardView, CreateSession, MoveResponse, Phase, SessionReport, SessionSummary};

const SESSION_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("no session with id {0}")]
    UnknownSession(String),
    #[error("no model with id {0} in the store")]
    UnknownModel(String),
    #[error("{0}")]
    Illegal(IllegalMove),
    #[error("it is not the human's turn")]
    NotHumanTurn,
    #[error("the session has finished all its games")]
    Complete,
    #[error("another request is already changing this session")]
    Busy,
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    /// Machine-readable code sent to clients.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownSession(_) => "unknown_session",
            ServiceError::UnknownModel(_) => "unknown_model",
            ServiceError::Illegal(rule) => rule.code(),
            ServiceError::NotHumanTurn => "not_human_turn",
            ServiceError::Complete => "session_complete",
            ServiceError::Busy => "session_busy",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Internal(_) => "internal",
        }
    }
}

impl From<HcError> for ServiceError {
    fn from(e: HcError) -> Self {
        match e {
            HcError::Illegal(rule) => ServiceError::Illegal(rule),
            HcError::NotHumanTurn => ServiceError::NotHumanTurn,
            HcError::Complete(_) => ServiceError::Complete,
            HcError::Run(e) => ServiceError::Internal(e.to_string()),
        }
    }
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownModel(id) => ServiceError::UnknownModel(id),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SessionFile {
    format_version: u32,
    id: String,
    created_at: DateTime<Utc>,
    checkpoint: HcCheckpoint,
    initial_models: [String; 2],
    /// Ids of the networks saved at the latest game boundary.
    current_models: [String; 2],
    closed: bool,
}

struct Live {
    session: HcSession,
    file: SessionFile,
}

/// One session: a single writer plus a published read-only view.
pub struct Slot {
    id: String,
    dir: PathBuf,
    live: Mutex<Live>,
    view: RwLock<Arc<BoardView>>,
}

impl Slot {
    pub fn view(&self) -> Arc<BoardView> {
        self.view.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    fn publish(&self, view: BoardView) {
        *self.view.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(view);
    }

    /// Claims the writer slot; a second concurrent claim is refused.
    pub fn claim(&self) -> Result<SessionWriter<'_>, ServiceError> {
        match self.live.try_lock() {
            Ok(guard) => Ok(SessionWriter { slot: self, live: guard }),
            Err(TryLockError::WouldBlock) => Err(ServiceError::Busy),
            Err(TryLockError::Poisoned(p)) => Ok(SessionWriter {
                slot: self,
                live: p.into_inner(),
            }),
        }
    }
}

pub struct SessionWriter<'a> {
    slot: &'a Slot,
    live: MutexGuard<'a, Live>,
}

fn model_file_name(games: usize, color: Color) -> String {
    format!("game-{games:03}-{color}.model")
}

fn write_json_atomic(path: &Path, value: &impl Serialize) -> Result<(), ServiceError> {
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string_pretty(value).expect("session file serializes");
    fs::write(&tmp, text)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))
}

impl SessionWriter<'_> {
    fn view(&self) -> BoardView {
        BoardView::of(&self.slot.id, &self.live.session, self.live.file.checkpoint.aborted)
    }

    fn save_boundary(&mut self) -> Result<(), ServiceError> {
        let games = self.live.session.records().len();
        let parents = self.live.file.current_models.to_vec();
        let mut ids = [String::new(), String::new()];
        for color in Color::BOTH {
            let path = self.slot.dir.join(model_file_name(games, color));
            let lineage = Lineage {
                parents: parents.clone(),
                sessions: vec![self.slot.id.clone()],
            };
            let file = save_model(&path, self.live.session.nets().get(color), lineage)?;
            ids[color.index()] = file.id;
        }
        self.live.file.current_models = ids;
        self.live.file.checkpoint = self.live.session.checkpoint();
        self.write_file()
    }

    fn write_file(&self) -> Result<(), ServiceError> {
        write_json_atomic(&self.slot.dir.join("session.json"), &self.live.file)
    }

    /// Validates and plays the human move, then lets the computer reply.
    pub fn submit(&mut self, mv: Move, store: &ExperimentStore) -> Result<MoveResponse, ServiceError> {
        let mut report = self.live.session.submit_human(mv)?;
        self.slot.publish(self.view());
        let reply = self.live.session.computer_reply()?;
        report.computer_moves.extend(reply.computer_moves);
        report.completed_games.extend(reply.completed_games);
        if !report.completed_games.is_empty() {
            self.save_boundary()?;
            if self.live.session.is_complete() {
                self.record_finished(store)?;
            }
        }
        let view = self.view();
        self.slot.publish(view.clone());
        Ok(MoveResponse {
            human_move: mv,
            computer_moves: report.computer_moves,
            completed_games: report.completed_games,
            view,
        })
    }

    /// Abandons the game in progress. Learning from the abandoned game is
    /// discarded: play restarts from the last checkpointed networks.
    pub fn abort(&mut self) -> Result<BoardView, ServiceError> {
        if self.live.session.is_complete() {
            return Err(ServiceError::Complete);
        }
        let mut checkpoint = self.live.file.checkpoint.clone();
        checkpoint.aborted += 1;
        let nets = load_nets(&self.slot.dir, checkpoint.records.len())?;
        self.live.session = HcSession::resume(checkpoint, nets)?;
        self.live.file.checkpoint = self.live.session.checkpoint();
        self.write_file()?;
        let view = self.view();
        self.slot.publish(view.clone());
        Ok(view)
    }

    fn record_finished(&self, store: &ExperimentStore) -> Result<(), ServiceError> {
        let run_id = format!("hc-{}", self.slot.id);
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for (ids, names, games) in [
            (&self.live.file.initial_models, &mut inputs, 0),
            (&self.live.file.current_models, &mut outputs, self.live.session.records().len()),
        ] {
            for color in Color::BOTH {
                let loaded = load_model(&self.slot.dir.join(model_file_name(games, color)))?;
                store.put_model(&loaded.file)?;
                names.push(ids[color.index()].clone());
            }
        }
        let spec = serde_json::json!({
            "session_id": self.slot.id,
            "hc": self.live.session.spec(),
            "initial_models": self.live.file.initial_models,
        });
        let aggregates = vec![SessionAggregate {
            session: "hc".into(),
            stats: self.live.session.stats(),
        }];
        let record = ExperimentRecord::new(&run_id, "hc", spec, aggregates, self.live.file.created_at)
            .with_models(inputs, outputs);
        store.record_experiment(&record, &game_rows(&run_id, "hc", self.live.session.records()))?;
        Ok(())
    }

    pub fn close(&mut self) -> Result<(), ServiceError> {
        self.live.file.closed = true;
        self.write_file()
    }
}

fn load_nets(dir: &Path, games: usize) -> Result<NetworkPair, ServiceError> {
    let load = |color| load_model(&dir.join(model_file_name(games, color))).map(|m| m.net);
    Ok(NetworkPair::new(load(Color::White)?, load(Color::Black)?))
}

/// All sessions known to the service.
pub struct Registry {
    data_dir: PathBuf,
    store: ExperimentStore,
    slots: RwLock<BTreeMap<String, Arc<Slot>>>,
}

impl Registry {
    /// Opens the data directory and resumes every open session at its last
    /// completed game.
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let data_dir = data_dir.into();
        let sessions = data_dir.join("sessions");
        fs::create_dir_all(&sessions).map_err(|e| ServiceError::Internal(format!("{}: {e}", sessions.display())))?;
        let store = ExperimentStore::open(data_dir.join("store"))?;
        let registry = Registry {
            data_dir,
            store,
            slots: RwLock::new(BTreeMap::new()),
        };
        let entries = fs::read_dir(&sessions).map_err(|e| ServiceError::Internal(e.to_string()))?;
        for entry in entries.flatten() {
            let path = entry.path().join("session.json");
            if !path.exists() {
                continue;
            }
            let slot = Self::recover(&entry.path())
                .map_err(|e| ServiceError::Internal(format!("recovering {}: {e}", path.display())))?;
            if let Some(slot) = slot {
                registry.slots.write().unwrap().insert(slot.id.clone(), Arc::new(slot));
            }
        }
        Ok(registry)
    }

    fn recover(dir: &Path) -> Result<Option<Slot>, ServiceError> {
        let text = fs::read_to_string(dir.join("session.json")).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let file: SessionFile = serde_json::from_str(&text).map_err(|e| ServiceError::Internal(e.to_string()))?;
        if file.closed {
            return Ok(None);
        }
        if file.format_version != SESSION_FORMAT_VERSION {
            return Err(ServiceError::Internal(format!("unknown session format {}", file.format_version)));
        }
        let nets = load_nets(dir, file.checkpoint.records.len())?;
        let session = HcSession::resume(file.checkpoint.clone(), nets)?;
        Ok(Some(Self::slot(dir.to_path_buf(), session, file)))
    }

    fn slot(dir: PathBuf, session: HcSession, file: SessionFile) -> Slot {
        let view = BoardView::of(&file.id, &session, file.checkpoint.aborted);
        Slot {
            id: file.id.clone(),
            dir,
            live: Mutex::new(Live { session, file }),
            view: RwLock::new(Arc::new(view)),
        }
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    pub fn store(&self) -> &ExperimentStore {
        &self.store
    }

    pub fn get(&self, id: &str) -> Result<Arc<Slot>, ServiceError> {
        self.slots
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn list(&self) -> Vec<SessionSummary> {
        let slots: Vec<Arc<Slot>> = self.slots.read().unwrap_or_else(|p| p.into_inner()).values().cloned().collect();
        slots.iter().map(|s| s.view().summary()).collect()
    }

    pub fn create(&self, req: CreateSession) -> Result<Arc<BoardView>, ServiceError> {
        let config = req.config.unwrap_or_default();
        config.validate().map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        if req.games < 1 {
            return Err(ServiceError::BadRequest("games must be at least 1".into()));
        }
        let uuid = uuid::Uuid::new_v4();
        let id = uuid.simple().to_string();
        let seed = req.seed.unwrap_or_else(|| uuid.as_u64_pair().0);
        let (white, white_file) = self.initial_net(config, Color::White, req.white_model.as_deref(), seed)?;
        let (black, black_file) = self.initial_net(config, Color::Black, req.black_model.as_deref(), seed)?;
        let nets = NetworkPair::new(white, black);
        let spec = HcSpec {
            config,
            human: req.human,
            games: req.games,
            seed,
            ..HcSpec::default()
        };
        let dir = self.data_dir.join("sessions").join(&id);
        fs::create_dir_all(&dir).map_err(|e| ServiceError::Internal(format!("{}: {e}", dir.display())))?;
        let mut initial = [String::new(), String::new()];
        for (color, stored) in [(Color::White, white_file), (Color::Black, black_file)] {
            let path = dir.join(model_file_name(0, color));
            // Stored models are copied verbatim so their ids carry over.
            let file = match stored {
                Some(file) => {
                    write_model_file(&path, &file)?;
                    file
                }
                None => save_model(&path, nets.get(color), Lineage::default())?,
            };
            initial[color.index()] = file.id;
        }
        let session = HcSession::new(spec, nets)?;
        let file = SessionFile {
            format_version: SESSION_FORMAT_VERSION,
            id: id.clone(),
            created_at: Utc::now(),
            checkpoint: session.checkpoint(),
            current_models: initial.clone(),
            initial_models: initial,
            closed: false,
        };
        write_json_atomic(&dir.join("session.json"), &file)?;
        let slot = Arc::new(Self::slot(dir, session, file));
        let view = slot.view();
        self.slots.write().unwrap_or_else(|p| p.into_inner()).insert(id, slot);
        Ok(view)
    }

    fn initial_net(
        &self,
        config: GameConfig,
        color: Color,
        model: Option<&str>,
        seed: u64,
    ) -> Result<(rlgame::ValueNetwork, Option<ModelFile>), ServiceError> {
        match model {
            Some(id) => {
                let LoadedModel { file, net } = self.store.get_model(id)?;
                if net.color != color || !net.config.same_board(&config) {
                    return Err(ServiceError::BadRequest(format!(
                        "model {id} is a {} network for n={} a={}, not {color} for n={} a={}",
                        net.color, net.config.n, net.config.a, config.n, config.a
                    )));
                }
                Ok((net, Some(file)))
            }
            None => {
                let net_seed = rlgame::seed::derive_seed(seed, &[0x6e6574, color.index() as u64]);
                Ok((init_network(config, color, net_seed, TdParams::default().init_weight_scale), None))
            }
        }
    }

    pub fn close(&self, id: &str) -> Result<(), ServiceError> {
        let slot = self.get(id)?;
        slot.claim()?.close()?;
        self.slots.write().unwrap_or_else(|p| p.into_inner()).remove(id);
        Ok(())
    }

    pub fn report(&self, id: &str) -> Result<SessionReport, ServiceError> {
        let slot = self.get(id)?;
        // Reports read the published view and the checkpoint file, never
        // waiting on an in-flight move.
        let view = slot.view();
        let text = fs::read_to_string(slot.dir.join("session.json")).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let file: SessionFile = serde_json::from_str(&text).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let stats = rlgame::SessionStats::from_records(&view.records);
        Ok(SessionReport {
            session_id: id.to_string(),
            human: view.human,
            games_planned: view.progress.games_planned,
            complete: view.phase == Phase::Complete,
            white_wins: stats.white_wins,
            black_wins: stats.black_wins,
            draws: stats.draws,
            white_avg_moves: stats.avg_moves(Color::White),
            black_avg_moves: stats.avg_moves(Color::Black),
            records: view.records.clone(),
            initial_models: file.initial_models,
            current_models: file.current_models,
        })
    }
}
