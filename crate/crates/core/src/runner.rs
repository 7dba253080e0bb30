//! Game and session driver with online TD learning.
//!
//! Each colour's network learns from its own after-state chain: whenever a
//! colour moves, the after-state it produced is scored by its network and a
//! TD step links it to that colour's previous after-state. Rewards collected
//! in between (pawn swings from either side's moves) are summed into that
//! step. At the end of a game every learning network takes one terminal step
//! towards its terminal reward with `v_next = 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentError, AgentKind, AgentSpec};
use crate::features::encode_after_state;
use crate::game::{apply_move, BoardState, Color, ConfigError, GameConfig, GameStatus, IllegalMove, Move, MoveEvents};
use crate::network::{DimensionMismatch, ValueNetwork};
use crate::search::LeafEval;
use crate::seed::derive_seed;
use crate::td::{intermediate_contribution, td_update, terminal_target, EligibilityTraces, NumericFailure, TdParams};

pub const WIN_REWARD: f64 = 100.0;

/// White and black networks of one player or session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkPair {
    pub white: ValueNetwork,
    pub black: ValueNetwork,
}

impl NetworkPair {
    pub fn new(white: ValueNetwork, black: ValueNetwork) -> Self {
        NetworkPair { white, black }
    }

    pub fn get(&self, color: Color) -> &ValueNetwork {
        match color {
            Color::White => &self.white,
            Color::Black => &self.black,
        }
    }

    pub fn get_mut(&mut self, color: Color) -> &mut ValueNetwork {
        match color {
            Color::White => &mut self.white,
            Color::Black => &mut self.black,
        }
    }
}

/// Reward from `perspective` for one applied move, on the `[-100, 100]` scale.
pub fn compute_reward(events: &MoveEvents, status: GameStatus, perspective: Color, beta: usize) -> f64 {
    match status {
        GameStatus::Ongoing => pawn_reward(events, perspective, beta),
        GameStatus::Draw => 0.0,
        s if s.winner() == Some(perspective) => WIN_REWARD,
        _ => -WIN_REWARD,
    }
}

/// `100·(opponent losses − own losses)/β`, clamped.
pub fn pawn_reward(events: &MoveEvents, perspective: Color, beta: usize) -> f64 {
    let swing = events.lost(perspective.opponent()) as f64 - events.lost(perspective) as f64;
    (WIN_REWARD * swing / beta as f64).clamp(-WIN_REWARD, WIN_REWARD)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    White,
    Black,
    Draw,
}

impl Winner {
    pub fn from_status(status: GameStatus) -> Option<Winner> {
        match status {
            GameStatus::Ongoing => None,
            GameStatus::WhiteWon => Some(Winner::White),
            GameStatus::BlackWon => Some(Winner::Black),
            GameStatus::Draw => Some(Winner::Draw),
        }
    }

    pub fn color(self) -> Option<Color> {
        match self {
            Winner::White => Some(Color::White),
            Winner::Black => Some(Color::Black),
            Winner::Draw => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameRecord {
    pub game_index: u32,
    pub winner: Winner,
    pub plies: u32,
    pub white_moves: u32,
    pub black_moves: u32,
    pub white_pawns_lost: u32,
    pub black_pawns_lost: u32,
}

impl GameRecord {
    pub fn moves(&self, color: Color) -> u32 {
        match color {
            Color::White => self.white_moves,
            Color::Black => self.black_moves,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("agent for {color} proposed an illegal move {mv}: {rule}")]
    Protocol { color: Color, mv: Move, rule: IllegalMove },
    #[error(transparent)]
    Illegal(#[from] IllegalMove),
    #[error("numeric failure during learning: {0}")]
    Numeric(#[from] NumericFailure),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid session spec: {0}")]
    InvalidSpec(String),
}

#[derive(Clone, Debug)]
struct ChainLink {
    value: f64,
    grad: Vec<f64>,
}

/// One game in progress together with its learning state.
#[derive(Clone, Debug)]
pub struct TrainingGame {
    state: BoardState,
    learn: [bool; 2],
    td: TdParams,
    links: [Option<ChainLink>; 2],
    traces: [EligibilityTraces; 2],
    pending: [f64; 2],
    moves: [u32; 2],
    lost: [u32; 2],
    transcript: Vec<Move>,
    last_move: Option<Move>,
    td_steps: u64,
}

impl TrainingGame {
    /// Starts a fresh game; traces begin at zero.
    pub fn new(config: GameConfig, learn: [bool; 2], td: TdParams, nets: &NetworkPair) -> Result<Self, RunError> {
        for color in Color::BOTH {
            if !nets.get(color).config.same_board(&config) {
                return Err(RunError::InvalidSpec(format!(
                    "{color} network was built for a different board"
                )));
            }
        }
        Ok(TrainingGame {
            state: BoardState::initial(config)?,
            learn,
            td,
            links: [None, None],
            traces: [
                EligibilityTraces::zeros_for(&nets.white),
                EligibilityTraces::zeros_for(&nets.black),
            ],
            pending: [0.0; 2],
            moves: [0; 2],
            lost: [0; 2],
            transcript: Vec::new(),
            last_move: None,
            td_steps: 0,
        })
    }

    pub fn state(&self) -> &BoardState {
        &self.state
    }

    pub fn transcript(&self) -> &[Move] {
        &self.transcript
    }

    pub fn last_move(&self) -> Option<Move> {
        self.last_move
    }

    pub fn moves_made(&self, color: Color) -> u32 {
        self.moves[color.index()]
    }

    pub fn traces(&self, color: Color) -> &EligibilityTraces {
        &self.traces[color.index()]
    }

    /// TD updates applied so far in this game.
    pub fn td_steps(&self) -> u64 {
        self.td_steps
    }

    /// Applies `mv` for the side to move and performs the learning steps it
    /// triggers. An illegal move leaves the game and networks untouched.
    pub fn play(&mut self, mv: Move, nets: &mut NetworkPair) -> Result<MoveEvents, RunError> {
        let (next, events) = apply_move(&self.state, mv)?;
        let mover = self.state.to_move;
        let beta = self.state.config.beta;
        self.state = next;
        self.transcript.push(mv);
        self.last_move = Some(mv);
        self.moves[mover.index()] += 1;
        for color in Color::BOTH {
            self.lost[color.index()] += events.lost(color) as u32;
            self.pending[color.index()] += pawn_reward(&events, color, beta);
        }

        // A terminal position is never evaluated: the game-ending move is
        // credited only through the terminal step, with v_next = 0.
        if self.state.is_terminal() {
            self.finish(nets)?;
        } else if self.learn[mover.index()] {
            self.advance_chain(mover, nets)?;
        }
        Ok(events)
    }

    fn advance_chain(&mut self, color: Color, nets: &mut NetworkPair) -> Result<(), RunError> {
        let i = color.index();
        let x = encode_after_state(&self.state, color);
        let net = nets.get_mut(color);
        let reward = self.pending[i].clamp(-WIN_REWARD, WIN_REWARD);
        self.pending[i] = 0.0;
        if let Some(prev) = self.links[i].take() {
            let v_next = net.value(&x)?;
            td_update(
                net,
                &mut self.traces[i],
                &self.td,
                prev.value,
                v_next,
                intermediate_contribution(reward),
                &prev.grad,
            )?;
            self.td_steps += 1;
        }
        let (value, grad) = net.value_and_gradient(&x)?;
        self.links[i] = Some(ChainLink { value, grad });
        Ok(())
    }

    fn finish(&mut self, nets: &mut NetworkPair) -> Result<(), RunError> {
        let status = self.state.status;
        let beta = self.state.config.beta;
        for color in Color::BOTH {
            let i = color.index();
            if !self.learn[i] {
                continue;
            }
            let net = nets.get_mut(color);
            if let Some(prev) = self.links[i].take() {
                let reward = compute_reward(&MoveEvents::default(), status, color, beta);
                td_update(
                    net,
                    &mut self.traces[i],
                    &self.td,
                    prev.value,
                    0.0,
                    terminal_target(reward),
                    &prev.grad,
                )?;
                self.td_steps += 1;
            }
            net.games_trained += 1;
        }
        Ok(())
    }

    pub fn record(&self, game_index: u32) -> Option<GameRecord> {
        Some(GameRecord {
            game_index,
            winner: Winner::from_status(self.state.status)?,
            plies: self.state.ply,
            white_moves: self.moves[0],
            black_moves: self.moves[1],
            white_pawns_lost: self.lost[0],
            black_pawns_lost: self.lost[1],
        })
    }
}

/// Everything needed to replay a computer-vs-computer session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub config: GameConfig,
    pub white_agent: AgentSpec,
    pub black_agent: AgentSpec,
    pub games: u32,
    pub learn_white: bool,
    pub learn_black: bool,
    pub td: TdParams,
    pub leaf_eval: LeafEval,
    pub run_seed: u64,
}

impl SessionSpec {
    /// Learner-vs-learner self-play with learning on for both colours.
    pub fn self_play(config: GameConfig, games: u32, run_seed: u64) -> Self {
        SessionSpec {
            config,
            white_agent: AgentSpec::default(),
            black_agent: AgentSpec::default(),
            games,
            learn_white: true,
            learn_black: true,
            td: TdParams::default(),
            leaf_eval: LeafEval::default(),
            run_seed,
        }
    }

    pub fn agent(&self, color: Color) -> &AgentSpec {
        match color {
            Color::White => &self.white_agent,
            Color::Black => &self.black_agent,
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.config.validate()?;
        if self.games < 1 {
            return Err(RunError::InvalidSpec("a session needs at least one game".into()));
        }
        self.td.validate().map_err(RunError::InvalidSpec)?;
        for color in Color::BOTH {
            let agent = self.agent(color);
            agent.validate()?;
            if agent.kind == AgentKind::HumanProxy {
                return Err(RunError::InvalidSpec(
                    "human-proxy agents only play through interactive sessions".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn game_seed(&self, game_index: u32) -> u64 {
        derive_seed(self.run_seed, &[u64::from(game_index)])
    }
}

pub fn agent_seed(game_seed: u64, color: Color, spec: &AgentSpec) -> u64 {
    derive_seed(game_seed, &[color.index() as u64, spec.seed])
}

/// Plays game `game_index` of `spec`, training `nets` in place.
pub fn play_game(spec: &SessionSpec, nets: &mut NetworkPair, game_index: u32) -> Result<GameRecord, RunError> {
    let seed = spec.game_seed(game_index);
    let mut agents = Color::BOTH.map(|c| Agent::new(*spec.agent(c), agent_seed(seed, c, spec.agent(c)), spec.leaf_eval));
    let mut game = TrainingGame::new(spec.config, [spec.learn_white, spec.learn_black], spec.td, nets)?;
    while !game.state().is_terminal() {
        let color = game.state().to_move;
        let mv = agents[color.index()].choose(game.state(), nets.get(color))?;
        match game.play(mv, nets) {
            Err(RunError::Illegal(rule)) => return Err(RunError::Protocol { color, mv, rule }),
            other => other?,
        };
    }
    Ok(game.record(game_index).expect("game is terminal"))
}

/// Aggregates in the shape of a comparison table: wins per side and the
/// average number of the winner's own moves per game won.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub games: u32,
    pub white_wins: u32,
    pub black_wins: u32,
    pub draws: u32,
    /// Sum of white's own moves over games white won.
    pub white_win_moves: u64,
    pub black_win_moves: u64,
    /// Sum of total plies over games each side won.
    pub white_win_plies: u64,
    pub black_win_plies: u64,
}

impl SessionStats {
    pub fn from_records(records: &[GameRecord]) -> Self {
        let mut s = SessionStats::default();
        for r in records {
            s.games += 1;
            match r.winner {
                Winner::White => {
                    s.white_wins += 1;
                    s.white_win_moves += u64::from(r.white_moves);
                    s.white_win_plies += u64::from(r.plies);
                }
                Winner::Black => {
                    s.black_wins += 1;
                    s.black_win_moves += u64::from(r.black_moves);
                    s.black_win_plies += u64::from(r.plies);
                }
                Winner::Draw => s.draws += 1,
            }
        }
        s
    }

    pub fn wins(&self, color: Color) -> u32 {
        match color {
            Color::White => self.white_wins,
            Color::Black => self.black_wins,
        }
    }

    pub fn win_moves(&self, color: Color) -> u64 {
        match color {
            Color::White => self.white_win_moves,
            Color::Black => self.black_win_moves,
        }
    }

    /// Average own moves per game won; 0 when the side won nothing.
    pub fn avg_moves(&self, color: Color) -> f64 {
        match self.wins(color) {
            0 => 0.0,
            w => self.win_moves(color) as f64 / f64::from(w),
        }
    }

    pub fn avg_plies(&self, color: Color) -> f64 {
        let plies = match color {
            Color::White => self.white_win_plies,
            Color::Black => self.black_win_plies,
        };
        match self.wins(color) {
            0 => 0.0,
            w => plies as f64 / f64::from(w),
        }
    }

    pub fn decided(&self) -> u32 {
        self.white_wins + self.black_wins
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionOutcome {
    pub records: Vec<GameRecord>,
    pub stats: SessionStats,
}

/// A session that stopped early; `records` holds the completed games.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("session aborted after {} games: {error}", records.len())]
pub struct SessionFailure {
    pub records: Vec<GameRecord>,
    pub error: RunError,
}

/// Plays `spec.games` games in sequence; networks keep evolving across games.
pub fn run_cc_session(spec: &SessionSpec, nets: &mut NetworkPair) -> Result<SessionOutcome, SessionFailure> {
    run_cc_session_with(spec, nets, |_, _| {})
}

/// As [`run_cc_session`], calling `on_game` after every completed game.
pub fn run_cc_session_with<F>(spec: &SessionSpec, nets: &mut NetworkPair, mut on_game: F) -> Result<SessionOutcome, SessionFailure>
where
    F: FnMut(&GameRecord, &NetworkPair),
{
    let mut records = Vec::with_capacity(spec.games as usize);
    if let Err(error) = spec.validate() {
        return Err(SessionFailure { records, error });
    }
    for game_index in 0..spec.games {
        match play_game(spec, nets, game_index) {
            Ok(record) => {
                on_game(&record, nets);
                records.push(record);
            }
            Err(error) => return Err(SessionFailure { records, error }),
        }
    }
    let stats = SessionStats::from_records(&records);
    Ok(SessionOutcome { records, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_network;

    fn fresh(config: GameConfig, seed: u64) -> NetworkPair {
        NetworkPair::new(
            init_network(config, Color::White, seed, 0.01),
            init_network(config, Color::Black, seed + 1, 0.01),
        )
    }

    #[test]
    fn reward_examples() {
        let none = MoveEvents::default();
        assert_eq!(compute_reward(&none, GameStatus::WhiteWon, Color::White, 10), 100.0);
        assert_eq!(compute_reward(&none, GameStatus::WhiteWon, Color::Black, 10), -100.0);
        assert_eq!(compute_reward(&none, GameStatus::Draw, Color::Black, 10), 0.0);
        assert_eq!(compute_reward(&none, GameStatus::Ongoing, Color::Black, 10), 0.0);
        let two = MoveEvents {
            black_pawns_lost: 2,
            ..MoveEvents::default()
        };
        assert_eq!(compute_reward(&two, GameStatus::Ongoing, Color::White, 10), 20.0);
        assert_eq!(compute_reward(&two, GameStatus::Ongoing, Color::Black, 10), -20.0);
        let wipe = MoveEvents {
            black_pawns_lost: 30,
            ..MoveEvents::default()
        };
        assert_eq!(compute_reward(&wipe, GameStatus::Ongoing, Color::White, 10), 100.0);
    }

    #[test]
    fn ply_cap_gives_draw() {
        let config = GameConfig::with_max_plies(8, 2, 10, 6).unwrap();
        let mut nets = fresh(config, 1);
        let spec = SessionSpec::self_play(config, 1, 3);
        let rec = play_game(&spec, &mut nets, 0).unwrap();
        assert_eq!(rec.winner, Winner::Draw);
        assert_eq!(rec.plies, 6);
        assert_eq!(rec.white_moves + rec.black_moves, rec.plies);
    }

    #[test]
    fn learning_off_leaves_network_untouched() {
        let config = GameConfig::new(5, 1, 3).unwrap();
        let mut nets = fresh(config, 7);
        let before = nets.clone();
        let mut spec = SessionSpec::self_play(config, 5, 9);
        spec.learn_black = false;
        run_cc_session(&spec, &mut nets).unwrap();
        assert_eq!(nets.black, before.black);
        assert_ne!(nets.white, before.white);
        assert_eq!(nets.white.games_trained, 5);
    }

    #[test]
    fn first_step_of_each_game_starts_from_zero_traces() {
        let config = GameConfig::default();
        let mut nets = fresh(config, 3);
        let td = TdParams::default();
        for _ in 0..2 {
            let mut game = TrainingGame::new(config, [true, true], td, &nets).unwrap();
            assert!(game.traces(Color::White).as_slice().iter().all(|&e| e == 0.0));
            // White's first after-state opens the chain without an update.
            let m = crate::game::legal_moves(game.state())[0];
            game.play(m, &mut nets).unwrap();
            assert_eq!(game.td_steps(), 0);
            let grad_before = {
                let x = encode_after_state(game.state(), Color::White);
                nets.white.value_and_gradient(&x).unwrap().1
            };
            let m = crate::game::legal_moves(game.state())[0];
            game.play(m, &mut nets).unwrap();
            let m = crate::game::legal_moves(game.state())[0];
            game.play(m, &mut nets).unwrap();
            // Second white move: traces = λ·0 + grad of first after-state.
            assert_eq!(game.traces(Color::White).as_slice(), grad_before.as_slice());
        }
    }

    #[test]
    fn illegal_move_changes_nothing() {
        let config = GameConfig::default();
        let mut nets = fresh(config, 3);
        let before = nets.clone();
        let mut game = TrainingGame::new(config, [true, true], TdParams::default(), &nets).unwrap();
        let err = game
            .play(Move::Exit { to: crate::game::Coord::new(5, 5) }, &mut nets)
            .unwrap_err();
        assert_eq!(err, RunError::Illegal(IllegalMove::NotAdjacent));
        assert_eq!(nets, before);
        assert_eq!(game.state().ply, 0);
        assert!(game.transcript().is_empty());
    }

    #[test]
    fn human_proxy_rejected_in_cc() {
        let config = GameConfig::default();
        let mut spec = SessionSpec::self_play(config, 1, 0);
        spec.black_agent = AgentSpec::human_proxy();
        assert!(matches!(spec.validate(), Err(RunError::InvalidSpec(_))));
    }
}
