//! Wire payloads. Coordinates serialize as `{ "col": c, "row": r }` with
//! row 0 on white's side of the board.

use serde::{Deserialize, Serialize};

use rlgame::hc::HcSession;
use rlgame::{Color, Coord, GameConfig, GameRecord, GameStatus, Move};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    HumanTurn,
    ComputerMoving,
    Complete,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PawnView {
    pub col: usize,
    pub row: usize,
    pub color: Color,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerColor {
    pub white: u32,
    pub black: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    /// One-based number of the game on the board.
    pub game: u32,
    pub games_planned: u32,
    pub completed: u32,
    pub aborted: u32,
    pub white_wins: u32,
    pub black_wins: u32,
    pub draws: u32,
}

/// Everything a client needs to draw the board and offer moves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoardView {
    pub session_id: String,
    pub phase: Phase,
    pub human: Color,
    pub config: GameConfig,
    /// One string per row, row 0 first: `W`/`B` pawns, `.` empty, `#` base.
    pub rows: Vec<String>,
    pub pawns: Vec<PawnView>,
    /// Pawns still waiting in each base.
    pub base: PerColor,
    pub to_move: Color,
    pub ply: u32,
    pub status: GameStatus,
    pub last_move: Option<Move>,
    /// Moves made by each side in the game on the board.
    pub moves: PerColor,
    /// The human's legal moves; empty unless `phase` is `human_turn`.
    pub legal_moves: Vec<Move>,
    pub progress: Progress,
    pub records: Vec<GameRecord>,
}

impl BoardView {
    pub fn of(id: &str, session: &HcSession, aborted: u32) -> Self {
        let state = session.state();
        let cfg = state.config;
        let rows = (0..cfg.n)
            .map(|row| {
                (0..cfg.n)
                    .map(|col| {
                        let c = Coord::new(col, row);
                        match state.at(c) {
                            Some(Color::White) => 'W',
                            Some(Color::Black) => 'B',
                            None if cfg.is_base_cell(c) => '#',
                            None => '.',
                        }
                    })
                    .collect()
            })
            .collect();
        let pawns = state
            .pawn_cells()
            .map(|(c, color)| PawnView {
                col: c.col,
                row: c.row,
                color,
            })
            .collect();
        let stats = session.stats();
        let complete = session.is_complete();
        BoardView {
            session_id: id.to_string(),
            phase: if complete {
                Phase::Complete
            } else if session.is_human_turn() {
                Phase::HumanTurn
            } else {
                Phase::ComputerMoving
            },
            human: session.spec().human,
            config: cfg,
            rows,
            pawns,
            base: PerColor {
                white: state.base_count(Color::White) as u32,
                black: state.base_count(Color::Black) as u32,
            },
            to_move: state.to_move,
            ply: state.ply,
            status: state.status,
            last_move: session.game().last_move(),
            moves: PerColor {
                white: session.game().moves_made(Color::White),
                black: session.game().moves_made(Color::Black),
            },
            legal_moves: session.human_moves(),
            progress: Progress {
                game: if complete { session.spec().games } else { session.game_index() + 1 },
                games_planned: session.spec().games,
                completed: session.game_index(),
                aborted,
                white_wins: stats.white_wins,
                black_wins: stats.black_wins,
                draws: stats.draws,
            },
            records: session.records().to_vec(),
        }
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            session_id: self.session_id.clone(),
            phase: self.phase,
            human: self.human,
            progress: self.progress.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub phase: Phase,
    pub human: Color,
    pub progress: Progress,
}

fn default_human() -> Color {
    Color::White
}

fn default_games() -> u32 {
    rlgame::hc::DEFAULT_HC_GAMES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    #[serde(default = "default_human")]
    pub human: Color,
    #[serde(default = "default_games")]
    pub games: u32,
    /// Board shape; the standard 8x8 board when omitted.
    #[serde(default)]
    pub config: Option<GameConfig>,
    /// Start from stored models instead of fresh networks.
    #[serde(default)]
    pub white_model: Option<String>,
    #[serde(default)]
    pub black_model: Option<String>,
    /// Fixes network initialisation and the computer's exploration.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for CreateSession {
    fn default() -> Self {
        CreateSession {
            human: default_human(),
            games: default_games(),
            config: None,
            white_model: None,
            black_model: None,
            seed: None,
        }
    }
}

/// Response to a submitted move.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveResponse {
    pub human_move: Move,
    pub computer_moves: Vec<Move>,
    pub completed_games: Vec<GameRecord>,
    pub view: BoardView,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub human: Color,
    pub games_planned: u32,
    pub complete: bool,
    pub white_wins: u32,
    pub black_wins: u32,
    pub draws: u32,
    /// Average own moves per game won, per side.
    pub white_avg_moves: f64,
    pub black_avg_moves: f64,
    pub records: Vec<GameRecord>,
    pub initial_models: [String; 2],
    /// Models checkpointed after the latest completed game.
    pub current_models: [String; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCode {
    pub code: String,
    pub message: String,
}
