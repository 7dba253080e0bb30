//! Fixed-depth minimax tutor.
//!
//! A look-ahead of `2k + 1` plies expands `k + 1` levels for the searching
//! side and `k` for its opponent. Leaves are scored by [`leaf_eval`] from the
//! root player's perspective. Terminal nodes score `±(WIN_SCORE + remaining
//! depth)`, so wins dominate every heuristic score and earlier wins are
//! preferred over later ones.
//!
//! Ties resolve to the first move in canonical [`Move`] order; the
//! alpha-beta search returns exactly the move the unpruned search would.

use serde::{Deserialize, Serialize};

use crate::game::{apply_move, legal_moves, BoardState, Color, GameStatus, Move};

pub const WIN_SCORE: f64 = 10_000.0;

/// Heuristic weights for non-terminal leaves.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafEval {
    pub material_weight: f64,
    pub progress_weight: f64,
}

impl Default for LeafEval {
    fn default() -> Self {
        LeafEval {
            material_weight: 10.0,
            progress_weight: 1.0,
        }
    }
}

fn max_progress(state: &BoardState, color: Color) -> usize {
    state
        .pawn_cells()
        .filter(|&(_, c)| c == color)
        .map(|(cell, _)| state.config.distance_from_base(color, cell))
        .max()
        .unwrap_or(0)
}

pub fn leaf_eval(state: &BoardState, perspective: Color, eval: &LeafEval) -> f64 {
    match state.status {
        GameStatus::Ongoing => {
            let opp = perspective.opponent();
            let material = state.pawns(perspective) as f64 - state.pawns(opp) as f64;
            let progress = max_progress(state, perspective) as f64 - max_progress(state, opp) as f64;
            eval.material_weight * material + eval.progress_weight * progress
        }
        GameStatus::Draw => 0.0,
        status if status.winner() == Some(perspective) => WIN_SCORE,
        _ => -WIN_SCORE,
    }
}

/// Per-level expansion counts, for auditing search depth.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchStats {
    /// `levels[d]` = (colour that moved at depth `d + 1`, moves expanded there).
    pub levels: Vec<(Color, u64)>,
}

impl SearchStats {
    fn record(&mut self, level: usize, color: Color, count: usize) {
        if self.levels.len() <= level {
            self.levels.resize(level + 1, (color, 0));
        }
        // Children are recorded before parents, so the colour of a level is
        // fixed by whoever records into it, not by the resize fill.
        self.levels[level].0 = color;
        self.levels[level].1 += count as u64;
    }

    /// Number of levels at which `color` moved.
    pub fn levels_for(&self, color: Color) -> usize {
        self.levels.iter().filter(|(c, n)| *c == color && *n > 0).count()
    }
}

fn score(state: &BoardState, depth: u32, root: Color, eval: &LeafEval) -> Option<f64> {
    if state.is_terminal() {
        let base = leaf_eval(state, root, eval);
        return Some(if base > 0.0 {
            base + f64::from(depth)
        } else if base < 0.0 {
            base - f64::from(depth)
        } else {
            0.0
        });
    }
    if depth == 0 {
        return Some(leaf_eval(state, root, eval));
    }
    None
}

fn children(state: &BoardState) -> impl Iterator<Item = (Move, BoardState)> + '_ {
    legal_moves(state).into_iter().map(move |m| {
        let (child, _) = apply_move(state, m).expect("generated move is legal");
        (m, child)
    })
}

/// Unpruned minimax value of `state` for `root`.
pub fn minimax_value(state: &BoardState, depth: u32, root: Color, eval: &LeafEval, stats: &mut SearchStats) -> f64 {
    minimax_inner(state, depth, 0, root, eval, stats)
}

fn minimax_inner(
    state: &BoardState,
    depth: u32,
    level: usize,
    root: Color,
    eval: &LeafEval,
    stats: &mut SearchStats,
) -> f64 {
    if let Some(s) = score(state, depth, root, eval) {
        return s;
    }
    let maximizing = state.to_move == root;
    let mut best = if maximizing { f64::NEG_INFINITY } else { f64::INFINITY };
    let mut expanded = 0;
    for (_, child) in children(state) {
        expanded += 1;
        let v = minimax_inner(&child, depth - 1, level + 1, root, eval, stats);
        best = if maximizing { best.max(v) } else { best.min(v) };
    }
    stats.record(level, state.to_move, expanded);
    best
}

fn alphabeta(state: &BoardState, depth: u32, root: Color, mut alpha: f64, mut beta: f64, eval: &LeafEval) -> f64 {
    if let Some(s) = score(state, depth, root, eval) {
        return s;
    }
    if state.to_move == root {
        let mut best = f64::NEG_INFINITY;
        for (_, child) in children(state) {
            best = best.max(alphabeta(&child, depth - 1, root, alpha, beta, eval));
            alpha = alpha.max(best);
            if alpha >= beta {
                break;
            }
        }
        best
    } else {
        let mut best = f64::INFINITY;
        for (_, child) in children(state) {
            best = best.min(alphabeta(&child, depth - 1, root, alpha, beta, eval));
            beta = beta.min(best);
            if alpha >= beta {
                break;
            }
        }
        best
    }
}

/// Best move and its value under unpruned search.
pub fn best_move_unpruned(
    state: &BoardState,
    lookahead: u32,
    eval: &LeafEval,
    stats: &mut SearchStats,
) -> Option<(Move, f64)> {
    let root = state.to_move;
    let mut best: Option<(Move, f64)> = None;
    let mut expanded = 0;
    for (m, child) in children(state) {
        expanded += 1;
        let v = minimax_inner(&child, lookahead.saturating_sub(1), 1, root, eval, stats);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((m, v));
        }
    }
    stats.record(0, root, expanded);
    best
}

/// Best move and its value under alpha-beta search.
pub fn best_move(state: &BoardState, lookahead: u32, eval: &LeafEval) -> Option<(Move, f64)> {
    let root = state.to_move;
    let mut best: Option<(Move, f64)> = None;
    let mut alpha = f64::NEG_INFINITY;
    for (m, child) in children(state) {
        let v = alphabeta(&child, lookahead.saturating_sub(1), root, alpha, f64::INFINITY, eval);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((m, v));
        }
        alpha = alpha.max(v);
    }
    best
}

pub fn select_move_minimax(state: &BoardState, lookahead: u32, eval: &LeafEval) -> Option<Move> {
    best_move(state, lookahead, eval).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Coord, GameConfig};

    #[test]
    fn terminal_leaf_scores() {
        let cfg = GameConfig::default();
        let s = BoardState::from_parts(cfg, &[(Coord::new(5, 6), Color::White)], 9, 10, Color::White).unwrap();
        let (won, _) = apply_move(&s, Move::Step { from: Coord::new(5, 6), to: Coord::new(6, 6) }).unwrap();
        let e = LeafEval::default();
        assert_eq!(leaf_eval(&won, Color::White, &e), WIN_SCORE);
        assert_eq!(leaf_eval(&won, Color::Black, &e), -WIN_SCORE);
    }

    #[test]
    fn leaf_eval_antisymmetric_and_zero_when_balanced() {
        let cfg = GameConfig::default();
        let e = LeafEval::default();
        let s = BoardState::from_parts(
            cfg,
            &[(Coord::new(4, 2), Color::White), (Coord::new(5, 5), Color::Black)],
            9,
            7,
            Color::White,
        )
        .unwrap();
        assert_eq!(leaf_eval(&s, Color::White, &e), -leaf_eval(&s, Color::Black, &e));
        assert_eq!(leaf_eval(&s, Color::White, &e), leaf_eval(&s.mirrored(), Color::Black, &e));
        let balanced = BoardState::from_parts(
            cfg,
            &[(Coord::new(3, 1), Color::White), (Coord::new(4, 6), Color::Black)],
            9,
            9,
            Color::White,
        )
        .unwrap();
        assert_eq!(leaf_eval(&balanced, Color::White, &e), 0.0);
    }

    #[test]
    fn lookahead_one_takes_immediate_win() {
        let cfg = GameConfig::default();
        let s = BoardState::from_parts(
            cfg,
            &[(Coord::new(5, 6), Color::White), (Coord::new(3, 3), Color::White)],
            8,
            10,
            Color::White,
        )
        .unwrap();
        let m = select_move_minimax(&s, 1, &LeafEval::default()).unwrap();
        assert_eq!(m, Move::Step { from: Coord::new(5, 6), to: Coord::new(6, 6) });
    }

    #[test]
    fn depth_audit_counts_levels_per_side() {
        let cfg = GameConfig::new(5, 1, 3).unwrap();
        let s = BoardState::initial(cfg).unwrap();
        for k in 0..3u32 {
            let mut stats = SearchStats::default();
            best_move_unpruned(&s, 2 * k + 1, &LeafEval::default(), &mut stats).unwrap();
            assert_eq!(stats.levels_for(Color::White), (k + 1) as usize);
            assert_eq!(stats.levels_for(Color::Black), k as usize);
        }
    }
}
