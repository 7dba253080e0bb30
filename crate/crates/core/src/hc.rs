//! Human-vs-computer teaching sessions (`HC^k`).
//!
//! A session owns both networks for its whole lifetime: they are created (or
//! loaded) before the first game and never reset. Human moves train the
//! human-colour network exactly as agent moves would; the computer side is an
//! ε-greedy learner on its own network. Finished games are followed
//! immediately by the next one until the planned number of games is reached.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentSpec};
use crate::game::{legal_moves, BoardState, Color, GameConfig, IllegalMove, Move};
use crate::runner::{agent_seed, GameRecord, NetworkPair, RunError, SessionStats, TrainingGame};
use crate::search::LeafEval;
use crate::seed::derive_seed;
use crate::td::TdParams;

pub const DEFAULT_HC_GAMES: u32 = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HcSpec {
    pub config: GameConfig,
    pub human: Color,
    pub games: u32,
    pub computer: AgentSpec,
    pub td: TdParams,
    pub seed: u64,
}

impl Default for HcSpec {
    fn default() -> Self {
        HcSpec {
            config: GameConfig::default(),
            human: Color::White,
            games: DEFAULT_HC_GAMES,
            computer: AgentSpec::default(),
            td: TdParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HcError {
    #[error("illegal move: {0}")]
    Illegal(IllegalMove),
    #[error("it is not the human's turn")]
    NotHumanTurn,
    #[error("the session has finished all {0} games")]
    Complete(u32),
    #[error(transparent)]
    Run(RunError),
}

impl From<RunError> for HcError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Illegal(rule) => HcError::Illegal(rule),
            other => HcError::Run(other),
        }
    }
}

/// What one human move triggered.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub human_move: Option<Move>,
    pub computer_moves: Vec<Move>,
    pub completed_games: Vec<GameRecord>,
    pub learning_steps: u64,
}

/// Persistable snapshot taken at a game boundary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HcCheckpoint {
    pub spec: HcSpec,
    pub records: Vec<GameRecord>,
    pub transcripts: Vec<Vec<Move>>,
    pub aborted: u32,
}

#[derive(Clone, Debug)]
pub struct HcSession {
    spec: HcSpec,
    nets: NetworkPair,
    game: TrainingGame,
    computer: Agent,
    records: Vec<GameRecord>,
    transcripts: Vec<Vec<Move>>,
    aborted: u32,
}

impl HcSession {
    pub fn new(spec: HcSpec, nets: NetworkPair) -> Result<Self, HcError> {
        Self::resume(
            HcCheckpoint {
                spec,
                records: Vec::new(),
                transcripts: Vec::new(),
                aborted: 0,
            },
            nets,
        )
    }

    /// Restarts from the last completed game of a checkpoint.
    pub fn resume(checkpoint: HcCheckpoint, nets: NetworkPair) -> Result<Self, HcError> {
        let HcCheckpoint {
            spec,
            records,
            transcripts,
            aborted,
        } = checkpoint;
        spec.config.validate().map_err(RunError::from)?;
        spec.computer.validate().map_err(RunError::from)?;
        if spec.games < 1 {
            return Err(RunError::InvalidSpec("a session needs at least one game".into()).into());
        }
        let game = TrainingGame::new(spec.config, [true, true], spec.td, &nets)?;
        let computer = Agent::new(spec.computer, 0, LeafEval::default());
        let mut session = HcSession {
            spec,
            nets,
            game,
            computer,
            records,
            transcripts,
            aborted,
        };
        if !session.is_complete() {
            session.start_game()?;
        }
        Ok(session)
    }

    fn game_seed(&self) -> u64 {
        derive_seed(self.spec.seed, &[self.records.len() as u64, u64::from(self.aborted)])
    }

    fn reset_game(&mut self) -> Result<(), HcError> {
        self.game = TrainingGame::new(self.spec.config, [true, true], self.spec.td, &self.nets)?;
        let computer = self.spec.human.opponent();
        self.computer = Agent::new(
            self.spec.computer,
            agent_seed(self.game_seed(), computer, &self.spec.computer),
            LeafEval::default(),
        );
        Ok(())
    }

    fn start_game(&mut self) -> Result<Vec<Move>, HcError> {
        self.reset_game()?;
        let mut report = StepReport::default();
        self.computer_turns(&mut report)?;
        Ok(report.computer_moves)
    }

    pub fn spec(&self) -> &HcSpec {
        &self.spec
    }

    pub fn nets(&self) -> &NetworkPair {
        &self.nets
    }

    pub fn state(&self) -> &BoardState {
        self.game.state()
    }

    pub fn game(&self) -> &TrainingGame {
        &self.game
    }

    pub fn records(&self) -> &[GameRecord] {
        &self.records
    }

    pub fn transcripts(&self) -> &[Vec<Move>] {
        &self.transcripts
    }

    pub fn stats(&self) -> SessionStats {
        SessionStats::from_records(&self.records)
    }

    /// Zero-based index of the game in progress (equals games played).
    pub fn game_index(&self) -> u32 {
        self.records.len() as u32
    }

    pub fn is_complete(&self) -> bool {
        self.records.len() as u32 >= self.spec.games
    }

    pub fn is_human_turn(&self) -> bool {
        !self.is_complete() && !self.state().is_terminal() && self.state().to_move == self.spec.human
    }

    /// Legal moves for the human, empty when it is not their turn.
    pub fn human_moves(&self) -> Vec<Move> {
        if self.is_human_turn() {
            legal_moves(self.state())
        } else {
            Vec::new()
        }
    }

    pub fn checkpoint(&self) -> HcCheckpoint {
        HcCheckpoint {
            spec: self.spec.clone(),
            records: self.records.clone(),
            transcripts: self.transcripts.clone(),
            aborted: self.aborted,
        }
    }

    /// Applies the human's move with its learning step. The state is
    /// untouched when the move is rejected.
    pub fn submit_human(&mut self, mv: Move) -> Result<StepReport, HcError> {
        if self.is_complete() {
            return Err(HcError::Complete(self.spec.games));
        }
        if !self.is_human_turn() {
            return Err(HcError::NotHumanTurn);
        }
        let steps_before = self.game.td_steps();
        self.game.play(mv, &mut self.nets)?;
        let mut report = StepReport {
            human_move: Some(mv),
            learning_steps: self.game.td_steps() - steps_before,
            ..StepReport::default()
        };
        self.close_if_finished(&mut report)?;
        Ok(report)
    }

    /// Plays computer moves until it is the human's turn or the session ends.
    pub fn computer_reply(&mut self) -> Result<StepReport, HcError> {
        let mut report = StepReport::default();
        self.computer_turns(&mut report)?;
        Ok(report)
    }

    /// Human move followed by the computer's reply.
    pub fn hc_step(&mut self, mv: Move) -> Result<StepReport, HcError> {
        let mut report = self.submit_human(mv)?;
        let reply = self.computer_reply()?;
        report.computer_moves.extend(reply.computer_moves);
        report.completed_games.extend(reply.completed_games);
        report.learning_steps += reply.learning_steps;
        Ok(report)
    }

    fn computer_turns(&mut self, report: &mut StepReport) -> Result<(), HcError> {
        while !self.is_complete() && !self.state().is_terminal() && self.state().to_move != self.spec.human {
            let color = self.state().to_move;
            let mv = self.computer.choose(self.game.state(), self.nets.get(color)).map_err(RunError::from)?;
            let steps_before = self.game.td_steps();
            self.game.play(mv, &mut self.nets).map_err(|e| match e {
                RunError::Illegal(rule) => RunError::Protocol { color, mv, rule },
                other => other,
            })?;
            report.computer_moves.push(mv);
            report.learning_steps += self.game.td_steps() - steps_before;
            self.close_if_finished(report)?;
        }
        Ok(())
    }

    fn close_if_finished(&mut self, report: &mut StepReport) -> Result<(), HcError> {
        if !self.state().is_terminal() {
            return Ok(());
        }
        let record = self.game.record(self.game_index()).expect("terminal game has a record");
        self.transcripts.push(self.game.transcript().to_vec());
        self.records.push(record.clone());
        report.completed_games.push(record);
        if !self.is_complete() {
            // Opening moves of the next game are reported by `computer_turns`.
            self.reset_game()?;
        }
        Ok(())
    }

    /// Abandons the game in progress. It produces no record and no terminal
    /// learning signal; a fresh game with the same index starts.
    pub fn abort_game(&mut self) -> Result<Vec<Move>, HcError> {
        if self.is_complete() {
            return Err(HcError::Complete(self.spec.games));
        }
        self.aborted += 1;
        self.start_game()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{apply_move, initial_state, Coord};
    use crate::network::init_network;

    fn nets(config: GameConfig) -> NetworkPair {
        NetworkPair::new(
            init_network(config, Color::White, 1, 0.01),
            init_network(config, Color::Black, 2, 0.01),
        )
    }

    fn play_out(session: &mut HcSession, games: u32) {
        let mut i = 0u64;
        while !session.is_complete() {
            let moves = session.human_moves();
            assert!(!moves.is_empty());
            let mv = moves[(i as usize * 7) % moves.len()];
            session.hc_step(mv).unwrap();
            i += 1;
        }
        assert_eq!(session.records().len() as u32, games);
    }

    #[test]
    fn small_session_completes() {
        let config = GameConfig::with_max_plies(5, 1, 3, 200).unwrap();
        let spec = HcSpec {
            config,
            games: 3,
            ..HcSpec::default()
        };
        let mut s = HcSession::new(spec, nets(config)).unwrap();
        play_out(&mut s, 3);
        assert!(matches!(
            s.hc_step(Move::Exit { to: Coord::new(1, 0) }),
            Err(HcError::Complete(3))
        ));
    }

    #[test]
    fn human_black_sees_computer_opening() {
        let config = GameConfig::default();
        let spec = HcSpec {
            human: Color::Black,
            games: 1,
            ..HcSpec::default()
        };
        let s = HcSession::new(spec, nets(config)).unwrap();
        assert_eq!(s.state().ply, 1);
        assert!(s.is_human_turn());
    }

    #[test]
    fn rejected_move_leaves_everything_unchanged() {
        let config = GameConfig::default();
        let mut s = HcSession::new(HcSpec::default(), nets(config)).unwrap();
        s.hc_step(Move::Exit { to: Coord::new(2, 1) }).unwrap();
        // White pawn at (2,1), distance 1; stepping into the base is backward.
        let before_state = s.state().clone();
        let before_nets = s.nets().clone();
        let err = s
            .hc_step(Move::Step { from: Coord::new(2, 1), to: Coord::new(1, 1) })
            .unwrap_err();
        assert_eq!(err, HcError::Illegal(IllegalMove::DistanceDecrease));
        assert_eq!(s.state(), &before_state);
        assert_eq!(s.nets(), &before_nets);
    }

    #[test]
    fn transcripts_replay_to_final_positions() {
        let config = GameConfig::with_max_plies(5, 1, 3, 200).unwrap();
        let spec = HcSpec {
            config,
            games: 2,
            ..HcSpec::default()
        };
        let mut s = HcSession::new(spec, nets(config)).unwrap();
        play_out(&mut s, 2);
        for (moves, record) in s.transcripts().iter().zip(s.records()) {
            let mut st = initial_state(config).unwrap();
            for &m in moves {
                st = apply_move(&st, m).unwrap().0;
            }
            assert!(st.is_terminal());
            assert_eq!(st.ply, record.plies);
        }
    }

    #[test]
    fn resume_continues_after_last_completed_game() {
        let config = GameConfig::with_max_plies(5, 1, 3, 200).unwrap();
        let spec = HcSpec {
            config,
            games: 3,
            ..HcSpec::default()
        };
        let mut s = HcSession::new(spec, nets(config)).unwrap();
        while s.records().is_empty() {
            let mv = s.human_moves()[0];
            s.hc_step(mv).unwrap();
        }
        let resumed = HcSession::resume(s.checkpoint(), s.nets().clone()).unwrap();
        assert_eq!(resumed.game_index(), 1);
        assert_eq!(resumed.state().ply, 0);
    }
}
