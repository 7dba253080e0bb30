//! Shared helpers for the integration tests: reachable-position sampling and
//! rule oracles written independently of the engine.

#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlgame::network::init_network;
use rlgame::{apply_move, encode_after_state, legal_moves, BoardState, Color, Coord, GameConfig, Move, ValueNetwork};

/// Ongoing positions reached by uniformly random play from the start.
pub fn random_positions(config: GameConfig, count: usize, seed: u64) -> Vec<BoardState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut s = BoardState::initial(config).unwrap();
        let stop = rng.random_range(0..200u32);
        while !s.is_terminal() && s.ply < stop {
            let moves = legal_moves(&s);
            let m = *moves.choose(&mut rng).unwrap();
            s = apply_move(&s, m).unwrap().0;
        }
        if !s.is_terminal() {
            out.push(s);
        }
    }
    out
}

fn oracle_in_base(cfg: &GameConfig, color: Color, col: i64, row: i64) -> bool {
    let (n, a) = (cfg.n as i64, cfg.a as i64);
    match color {
        Color::White => col < a && row < a && col >= 0 && row >= 0,
        Color::Black => col >= n - a && row >= n - a && col < n && row < n,
    }
}

/// Smallest number of king steps from the cell to any cell of the base.
fn oracle_distance(cfg: &GameConfig, color: Color, col: i64, row: i64) -> i64 {
    let n = cfg.n as i64;
    let mut best = i64::MAX;
    for bc in 0..n {
        for br in 0..n {
            if oracle_in_base(cfg, color, bc, br) {
                best = best.min((bc - col).abs().max((br - row).abs()));
            }
        }
    }
    best
}

/// Every legal move of the side to move, by exhaustive enumeration of
/// (source, destination) pairs over the whole board.
pub fn brute_force_moves(s: &BoardState) -> Vec<Move> {
    let cfg = s.config;
    let n = cfg.n as i64;
    let me = s.to_move;
    let any_base = |c: i64, r: i64| oracle_in_base(&cfg, Color::White, c, r) || oracle_in_base(&cfg, Color::Black, c, r);
    let free = |c: i64, r: i64| !any_base(c, r) && s.at(Coord::new(c as usize, r as usize)).is_none();
    let mut out = Vec::new();
    if s.is_terminal() {
        return out;
    }
    for tr in 0..n {
        for tc in 0..n {
            if s.base_count(me) > 0 && free(tc, tr) {
                let touches = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|(dc, dr)| oracle_in_base(&cfg, me, tc + dc, tr + dr));
                if touches {
                    out.push(Move::Exit { to: Coord::new(tc as usize, tr as usize) });
                }
            }
            for fr in 0..n {
                for fc in 0..n {
                    if s.at(Coord::new(fc as usize, fr as usize)) != Some(me) {
                        continue;
                    }
                    if (fc - tc).abs() + (fr - tr).abs() != 1 {
                        continue;
                    }
                    let ok = oracle_in_base(&cfg, me.opponent(), tc, tr)
                        || (free(tc, tr) && oracle_distance(&cfg, me, tc, tr) >= oracle_distance(&cfg, me, fc, fr));
                    if ok {
                        out.push(Move::Step {
                            from: Coord::new(fc as usize, fr as usize),
                            to: Coord::new(tc as usize, tr as usize),
                        });
                    }
                }
            }
        }
    }
    out.sort();
    out
}

/// Every syntactically possible move on the board, legal or not.
pub fn all_candidate_moves(cfg: &GameConfig) -> Vec<Move> {
    let mut out = Vec::new();
    for t in 0..cfg.cell_count() {
        let to = cfg.coord(t);
        out.push(Move::Exit { to });
        for f in 0..cfg.cell_count() {
            let from = cfg.coord(f);
            if from != to {
                out.push(Move::Step { from, to });
            }
        }
    }
    out
}

pub fn small() -> GameConfig {
    GameConfig::new(5, 1, 3).unwrap()
}

const FD_STEP: f64 = 1e-5;

/// Central finite-difference gradient of the network output.
fn numeric_gradient(net: &ValueNetwork, x: &[f64]) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.params().len())
        .map(|i| {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + FD_STEP;
            let up = probe.forward_slice(x).unwrap().value;
            probe.params_mut()[i] = orig - FD_STEP;
            let down = probe.forward_slice(x).unwrap().value;
            probe.params_mut()[i] = orig;
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-300)
}

/// Worst relative error over `pairs` random (weights, input) pairs.
pub fn worst_gradient_error(pairs: usize, seed: u64) -> f64 {
    let cfg = GameConfig::default();
    let positions = random_positions(cfg, pairs, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (i, s) in positions.iter().enumerate() {
        let color = if i % 2 == 0 { Color::White } else { Color::Black };
        let scale = [0.01, 0.1, 0.5, 1.0][i % 4];
        let net = init_network(cfg, color, rng.random(), scale);
        // Alternate real encodings with dense random inputs.
        let x: Vec<f64> = if i % 3 == 2 {
            (0..net.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect()
        } else {
            encode_after_state(s, color).as_slice().to_vec()
        };
        let act = net.forward_slice(&x).unwrap();
        let analytic = net.gradient(&x, &act);
        worst = worst.max(relative_error(&analytic, &numeric_gradient(&net, &x)));
    }
    worst
}

