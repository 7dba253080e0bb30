//! Per-colour feed-forward value network: `input → hidden → 1`, logistic
//! activations on both layers, so outputs read as win probabilities.
//!
//! Parameters live in one flat vector laid out as
//! `[w_ih (hidden × input, row per hidden unit) | b_h | w_ho | b_o]`;
//! gradients and eligibility traces share the same layout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{feature_len, FeatureVector};
use crate::game::{Color, GameConfig};

pub const DEFAULT_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("input has {got} features, network expects {expected}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub got: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueNetwork {
    pub color: Color,
    pub config: GameConfig,
    input_dim: usize,
    hidden_dim: usize,
    params: Vec<f64>,
    pub games_trained: u64,
}

/// Output of a forward pass, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Activations {
    pub value: f64,
    pub hidden: Vec<f64>,
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn param_count(input_dim: usize, hidden_dim: usize) -> usize {
    hidden_dim * input_dim + hidden_dim + hidden_dim + 1
}

impl ValueNetwork {
    /// All-zero network for `config`; every output is exactly 0.5.
    pub fn zeros(config: GameConfig, color: Color) -> Self {
        let input_dim = feature_len(&config);
        let hidden_dim = input_dim / 2;
        ValueNetwork {
            color,
            config,
            input_dim,
            hidden_dim,
            params: vec![0.0; param_count(input_dim, hidden_dim)],
            games_trained: 0,
        }
    }

    /// Rebuilds a network from raw parts, checking the parameter count.
    pub fn from_params(
        config: GameConfig,
        color: Color,
        params: Vec<f64>,
        games_trained: u64,
    ) -> Result<Self, DimensionMismatch> {
        let mut net = ValueNetwork::zeros(config, color);
        if params.len() != net.params.len() {
            return Err(DimensionMismatch {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        net.params = params;
        net.games_trained = games_trained;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w_ih = self.hidden_dim * self.input_dim;
        let b_h = w_ih + self.hidden_dim;
        let w_ho = b_h + self.hidden_dim;
        (w_ih, b_h, w_ho)
    }

    fn check(&self, x: &[f64]) -> Result<(), DimensionMismatch> {
        if x.len() == self.input_dim {
            Ok(())
        } else {
            Err(DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            })
        }
    }

    pub fn forward(&self, x: &FeatureVector) -> Result<Activations, DimensionMismatch> {
        self.forward_slice(x.as_slice())
    }

    pub fn forward_slice(&self, x: &[f64]) -> Result<Activations, DimensionMismatch> {
        self.check(x)?;
        let (w_ih_end, b_h_end, w_ho_end) = self.offsets();
        let w_ih = &self.params[..w_ih_end];
        let b_h = &self.params[w_ih_end..b_h_end];
        let w_ho = &self.params[b_h_end..w_ho_end];
        let b_o = self.params[w_ho_end];

        let hidden: Vec<f64> = w_ih
            .chunks_exact(self.input_dim)
            .zip(b_h)
            .map(|(row, b)| {
                // Inputs are sparse (most cells empty).
                let z = row
                    .iter()
                    .zip(x)
                    .filter(|(_, &xi)| xi != 0.0)
                    .fold(*b, |acc, (w, xi)| acc + w * xi);
                logistic(z)
            })
            .collect();
        let z_out = hidden.iter().zip(w_ho).fold(b_o, |acc, (h, w)| acc + h * w);
        Ok(Activations {
            value: logistic(z_out),
            hidden,
        })
    }

    pub fn value(&self, x: &FeatureVector) -> Result<f64, DimensionMismatch> {
        Ok(self.forward(x)?.value)
    }

    /// ∂value/∂params at `x`, given the activations of a forward pass on `x`.
    pub fn gradient(&self, x: &[f64], act: &Activations) -> Vec<f64> {
        let (w_ih_end, b_h_end, w_ho_end) = self.offsets();
        let w_ho = &self.params[b_h_end..w_ho_end];
        let mut grad = vec![0.0; self.params.len()];
        let d_out = act.value * (1.0 - act.value);
        grad[w_ho_end] = d_out;
        for (j, &h) in act.hidden.iter().enumerate() {
            grad[b_h_end + j] = d_out * h;
            let d_hidden = d_out * w_ho[j] * h * (1.0 - h);
            grad[w_ih_end + j] = d_hidden;
            let row = &mut grad[j * self.input_dim..(j + 1) * self.input_dim];
            for (g, &xi) in row.iter_mut().zip(x) {
                *g = d_hidden * xi;
            }
        }
        grad
    }

    pub fn value_and_gradient(&self, x: &FeatureVector) -> Result<(f64, Vec<f64>), DimensionMismatch> {
        let act = self.forward(x)?;
        let grad = self.gradient(x.as_slice(), &act);
        Ok((act.value, grad))
    }
}

/// Seeded uniform initialisation in `[-scale, scale]`.
pub fn init_network(config: GameConfig, color: Color, seed: u64, scale: f64) -> ValueNetwork {
    let mut net = ValueNetwork::zeros(config, color);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in net.params.iter_mut() {
        *p = rng.random_range(-scale..=scale);
    }
    net
}
