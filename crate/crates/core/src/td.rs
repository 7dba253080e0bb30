//! TD(λ) weight updates with accumulating eligibility traces.
//!
//! Rewards from the game live on a `[-100, 100]` scale while the network
//! outputs a probability, so rewards are mapped into value units before they
//! enter the TD error: terminal rewards through `(r + 100) / 200` (win → 1,
//! loss → 0, draw → 0.5) and intermediate ones as `r / 200`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{ValueNetwork, DEFAULT_INIT_SCALE};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdParams {
    /// Trace decay; 0.5 halves a gradient's credit per step back.
    pub lambda: f64,
    /// Fixed at 1: games are episodic and undiscounted.
    pub gamma: f64,
    pub alpha: f64,
    pub init_weight_scale: f64,
}

impl Default for TdParams {
    fn default() -> Self {
        TdParams {
            lambda: 0.5,
            gamma: 1.0,
            alpha: 0.05,
            init_weight_scale: DEFAULT_INIT_SCALE,
        }
    }
}

impl TdParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.gamma != 1.0 {
            return Err(format!("gamma is fixed at 1, got {}", self.gamma));
        }
        if !(self.init_weight_scale >= 0.0 && self.init_weight_scale.is_finite()) {
            return Err(format!("init_weight_scale must be non-negative, got {}", self.init_weight_scale));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericFailure {
    #[error("TD error is not finite ({0})")]
    NonFiniteDelta(f64),
    #[error("parameter {index} became non-finite")]
    NonFiniteParameter { index: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EligibilityTraces(Vec<f64>);

impl EligibilityTraces {
    pub fn zeros_for(net: &ValueNetwork) -> Self {
        EligibilityTraces(vec![0.0; net.params().len()])
    }

    pub fn reset(&mut self) {
        self.0.iter_mut().for_each(|e| *e = 0.0);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `e ← λ·e + grad`.
    pub fn decay_and_add(&mut self, lambda: f64, grad: &[f64]) {
        for (e, g) in self.0.iter_mut().zip(grad) {
            *e = lambda * *e + g;
        }
    }
}

/// Terminal reward in value units.
pub fn terminal_target(reward: f64) -> f64 {
    (reward + 100.0) / 200.0
}

/// Intermediate reward in value units.
pub fn intermediate_contribution(reward: f64) -> f64 {
    reward / 200.0
}

/// One TD(λ) step. `reward` is already in value units; terminal steps pass
/// `v_next = 0`. Returns the TD error.
pub fn td_update(
    net: &mut ValueNetwork,
    traces: &mut EligibilityTraces,
    params: &TdParams,
    v_prev: f64,
    v_next: f64,
    reward: f64,
    grad_prev: &[f64],
) -> Result<f64, NumericFailure> {
    traces.decay_and_add(params.lambda, grad_prev);
    let delta = reward + params.gamma * v_next - v_prev;
    if !delta.is_finite() {
        return Err(NumericFailure::NonFiniteDelta(delta));
    }
    if delta == 0.0 {
        return Ok(delta);
    }
    let step = params.alpha * delta;
    for (index, (p, e)) in net.params_mut().iter_mut().zip(traces.as_slice()).enumerate() {
        *p += step * e;
        if !p.is_finite() {
            return Err(NumericFailure::NonFiniteParameter { index });
        }
    }
    Ok(delta)
}
