//! Board encoding fed to the value networks.
//!
//! Layout: one entry per non-base cell in row-major order (+1 own pawn,
//! −1 opponent pawn, 0 empty), then the enemy-base-entry bit, then nine
//! threshold bits `own home-base count >= k` for `k = 1..=9`. Total length
//! is `n² − 2a² + 10`.

use crate::game::{BoardState, Color, GameConfig};

pub const THRESHOLD_BITS: usize = 9;

pub fn feature_len(config: &GameConfig) -> usize {
    config.open_cell_count() + 1 + THRESHOLD_BITS
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }
}

/// Encodes `state` from `perspective`'s point of view.
pub fn encode_features(state: &BoardState, perspective: Color, entered_enemy_base: bool) -> FeatureVector {
    let cfg = &state.config;
    let mut values = Vec::with_capacity(feature_len(cfg));
    for row in 0..cfg.n {
        for col in 0..cfg.n {
            let c = crate::game::Coord::new(col, row);
            if cfg.is_base_cell(c) {
                continue;
            }
            values.push(match state.at(c) {
                Some(color) if color == perspective => 1.0,
                Some(_) => -1.0,
                None => 0.0,
            });
        }
    }
    values.push(if entered_enemy_base { 1.0 } else { 0.0 });
    let home = state.base_count(perspective);
    values.extend((1..=THRESHOLD_BITS).map(|k| if home >= k { 1.0 } else { 0.0 }));
    FeatureVector(values)
}

/// Encodes an after-state, taking the base-entry bit from the state itself.
pub fn encode_after_state(state: &BoardState, perspective: Color) -> FeatureVector {
    encode_features(state, perspective, state.breach == Some(perspective))
}
