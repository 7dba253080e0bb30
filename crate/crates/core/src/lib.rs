//! RLGame: a two-player race game on an n x n board, a TD(lambda) value
//! learner, minimax tutors and the session/tournament harness around them.

pub mod agents;
pub mod features;
pub mod game;
pub mod hc;
pub mod network;
pub mod runner;
pub mod search;
pub mod seed;
pub mod store;
pub mod td;
pub mod tournament;

pub use agents::{Agent, AgentError, AgentKind, AgentSpec};
pub use features::{encode_after_state, encode_features, feature_len, FeatureVector};
pub use game::{
    apply_move, distance_from_base, initial_state, legal_moves, BoardState, Color, Coord, GameConfig, GameStatus,
    IllegalMove, Move, MoveEvents,
};
pub use network::{init_network, ValueNetwork};
pub use runner::{run_cc_session, GameRecord, NetworkPair, RunError, SessionSpec, SessionStats, Winner};
pub use td::{EligibilityTraces, NumericFailure, TdParams};
