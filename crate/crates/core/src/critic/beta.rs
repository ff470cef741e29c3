use serde::{Deserialize, Serialize};

use crate::error::{MiceError, Result};

pub const DEFAULT_BETA0: f64 = 1.0;
pub const DEFAULT_ALPHA: f64 = 0.1;

/// Balancing factor β with its global update index n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaState {
    pub beta: f64,
    pub n: u64,
    pub gamma: f64,
    pub alpha: f64,
    pub last_bias: f64,
}

impl BetaState {
    pub fn new(beta0: f64, gamma: f64, alpha: f64) -> Self {
        BetaState {
            beta: beta0.max(0.0),
            n: 0,
            gamma,
            alpha,
            last_bias: 0.0,
        }
    }
}

/// β' = max(γⁿ(β − α ε / c^I), 0) for c^I > 0; unchanged for c^I = 0.
pub fn beta_update(state: &BetaState, bias: f64, intrinsic_cost: f64) -> Result<BetaState> {
    if intrinsic_cost < 0.0 || intrinsic_cost.is_nan() {
        return Err(MiceError::InvalidArgument(format!(
            "intrinsic cost must be non-negative, got {intrinsic_cost}"
        )));
    }
    if !bias.is_finite() {
        return Err(MiceError::InvalidArgument(format!("bias must be finite, got {bias}")));
    }
    let mut next = state.clone();
    next.last_bias = bias;
    if intrinsic_cost == 0.0 {
        return Ok(next);
    }
    let discount = state.gamma.powf(state.n as f64);
    next.beta = (discount * (state.beta - state.alpha * bias / intrinsic_cost)).max(0.0);
    next.n += 1;
    Ok(next)
}
