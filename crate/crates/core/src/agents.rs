//! Move-selection policies.
//!
//! The learner is ε-greedy with an inverted parameter:
//! `exploit_prob` (0.9 by default) is the probability of taking the
//! best-valued move, NOT the exploration rate. The exploratory branch draws
//! uniformly over all legal moves, the greedy one included.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::encode_after_state;
use crate::game::{apply_move, legal_moves, BoardState, Move};
use crate::network::{DimensionMismatch, ValueNetwork};
use crate::search::{select_move_minimax, LeafEval};
use crate::seed::{rng_from, GameRng};

pub const DEFAULT_EXPLOIT_PROB: f64 = 0.9;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Learner,
    Random,
    Minimax,
    /// Moves are supplied externally (a human at the session service).
    HumanProxy,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub kind: AgentKind,
    /// Probability of the greedy move (learner only).
    pub exploit_prob: f64,
    /// Odd search depth in plies (minimax only).
    pub lookahead: u32,
    pub seed: u64,
}

impl Default for AgentSpec {
    fn default() -> Self {
        AgentSpec::learner(DEFAULT_EXPLOIT_PROB)
    }
}

impl AgentSpec {
    pub fn learner(exploit_prob: f64) -> Self {
        AgentSpec {
            kind: AgentKind::Learner,
            exploit_prob,
            lookahead: 1,
            seed: 0,
        }
    }

    pub fn random() -> Self {
        AgentSpec {
            kind: AgentKind::Random,
            ..AgentSpec::learner(DEFAULT_EXPLOIT_PROB)
        }
    }

    pub fn minimax(lookahead: u32) -> Self {
        AgentSpec {
            kind: AgentKind::Minimax,
            lookahead,
            ..AgentSpec::learner(DEFAULT_EXPLOIT_PROB)
        }
    }

    pub fn human_proxy() -> Self {
        AgentSpec {
            kind: AgentKind::HumanProxy,
            ..AgentSpec::learner(DEFAULT_EXPLOIT_PROB)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..=1.0).contains(&self.exploit_prob) {
            return Err(AgentError::InvalidSpec(format!(
                "exploit_prob must lie in [0, 1], got {}",
                self.exploit_prob
            )));
        }
        if self.kind == AgentKind::Minimax && (self.lookahead == 0 || self.lookahead.is_multiple_of(2)) {
            return Err(AgentError::InvalidSpec(format!(
                "minimax lookahead must be odd and at least 1, got {}",
                self.lookahead
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("no legal moves in a position handed to an agent")]
    NoLegalMoves,
    #[error("human-proxy agents take their moves from the session service")]
    NeedsHumanInput,
    #[error("invalid agent spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

/// Index of the greedy choice among `moves`; ties broken uniformly.
fn greedy_index(state: &BoardState, moves: &[Move], net: &ValueNetwork, rng: &mut GameRng) -> Result<usize, AgentError> {
    let mut best = f64::NEG_INFINITY;
    let mut ties: Vec<usize> = Vec::new();
    for (i, &m) in moves.iter().enumerate() {
        let (after, _) = apply_move(state, m).expect("generated move is legal");
        let v = net.value(&encode_after_state(&after, state.to_move))?;
        if v > best {
            best = v;
            ties.clear();
            ties.push(i);
        } else if v == best {
            ties.push(i);
        }
    }
    Ok(match ties.len() {
        1 => ties[0],
        n => ties[rng.random_range(0..n)],
    })
}

pub fn select_move_learner(
    state: &BoardState,
    net: &ValueNetwork,
    exploit_prob: f64,
    rng: &mut GameRng,
) -> Result<Move, AgentError> {
    let moves = legal_moves(state);
    match moves.len() {
        0 => Err(AgentError::NoLegalMoves),
        1 => Ok(moves[0]),
        n => {
            if rng.random::<f64>() < exploit_prob {
                Ok(moves[greedy_index(state, &moves, net, rng)?])
            } else {
                Ok(moves[rng.random_range(0..n)])
            }
        }
    }
}

pub fn select_move_random(state: &BoardState, rng: &mut GameRng) -> Result<Move, AgentError> {
    let moves = legal_moves(state);
    match moves.len() {
        0 => Err(AgentError::NoLegalMoves),
        1 => Ok(moves[0]),
        n => Ok(moves[rng.random_range(0..n)]),
    }
}

/// A policy instance with its own RNG stream.
#[derive(Clone, Debug)]
pub struct Agent {
    pub spec: AgentSpec,
    pub leaf: LeafEval,
    rng: GameRng,
}

impl Agent {
    pub fn new(spec: AgentSpec, seed: u64, leaf: LeafEval) -> Self {
        Agent {
            spec,
            leaf,
            rng: rng_from(seed),
        }
    }

    /// Picks a move for the side to move. `net` is that side's network and is
    /// only consulted by learners.
    pub fn choose(&mut self, state: &BoardState, net: &ValueNetwork) -> Result<Move, AgentError> {
        match self.spec.kind {
            AgentKind::Learner => select_move_learner(state, net, self.spec.exploit_prob, &mut self.rng),
            AgentKind::Random => select_move_random(state, &mut self.rng),
            AgentKind::Minimax => {
                select_move_minimax(state, self.spec.lookahead, &self.leaf).ok_or(AgentError::NoLegalMoves)
            }
            AgentKind::HumanProxy => Err(AgentError::NeedsHumanInput),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Color, Coord, GameConfig};
    use crate::network::init_network;

    #[test]
    fn single_legal_move_is_forced() {
        // White has one pawn boxed in except for a single lateral step; base empty.
        let cfg = GameConfig::default();
        let s = BoardState::from_parts(
            cfg,
            &[
                (Coord::new(0, 7), Color::White),
                (Coord::new(1, 6), Color::Black),
                (Coord::new(5, 5), Color::Black),
            ],
            0,
            8,
            Color::White,
        )
        .unwrap();
        let moves = legal_moves(&s);
        assert_eq!(moves.len(), 1);
        let net = init_network(cfg, Color::White, 3, 0.01);
        let mut rng = rng_from(1);
        for p in [0.0, 0.5, 1.0] {
            assert_eq!(select_move_learner(&s, &net, p, &mut rng).unwrap(), moves[0]);
        }
        assert_eq!(select_move_random(&s, &mut rng).unwrap(), moves[0]);
    }

    #[test]
    fn pure_greedy_is_reproducible() {
        let cfg = GameConfig::default();
        let s = BoardState::initial(cfg).unwrap();
        let net = init_network(cfg, Color::White, 11, 0.5);
        let pick = |seed| select_move_learner(&s, &net, 1.0, &mut rng_from(seed)).unwrap();
        let first = pick(5);
        for seed in 0..20 {
            assert_eq!(pick(seed), first, "unique maximum ignores the RNG");
        }
    }

    #[test]
    fn random_agent_is_seeded() {
        let s = BoardState::initial(GameConfig::default()).unwrap();
        let seq = |seed| {
            let mut rng = rng_from(seed);
            (0..50).map(|_| select_move_random(&s, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(seq(3), seq(3));
    }

    #[test]
    fn spec_validation() {
        assert!(AgentSpec::minimax(4).validate().is_err());
        assert!(AgentSpec::minimax(0).validate().is_err());
        assert!(AgentSpec::minimax(9).validate().is_ok());
        assert!(AgentSpec::learner(1.2).validate().is_err());
    }

    #[test]
    fn human_proxy_needs_input() {
        let cfg = GameConfig::default();
        let s = BoardState::initial(cfg).unwrap();
        let net = init_network(cfg, Color::White, 3, 0.01);
        let mut agent = Agent::new(AgentSpec::human_proxy(), 0, LeafEval::default());
        assert_eq!(agent.choose(&s, &net), Err(AgentError::NeedsHumanInput));
    }
}
