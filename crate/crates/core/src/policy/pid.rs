use serde::{Deserialize, Serialize};

use super::batch::{GradientBundle, SurrogateBatch};
use super::softmax::{log_softmax, logits_with, softmax, SoftmaxPolicy};
use crate::error::{MiceError, Result};

pub const DEFAULT_KP: f64 = 0.25;
pub const DEFAULT_KI: f64 = 0.005;
pub const DEFAULT_KD: f64 = 0.1;
pub const DEFAULT_INITIAL_LAMBDA: f64 = 1e-3;
pub const DEFAULT_ACTOR_LR: f64 = 3e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral: f64,
    pub prev_constraint: f64,
    pub lambda: f64,
}

impl Default for PidState {
    fn default() -> Self {
        PidState::new(DEFAULT_KP, DEFAULT_KI, DEFAULT_KD, DEFAULT_INITIAL_LAMBDA)
    }
}

impl PidState {
    pub fn new(kp: f64, ki: f64, kd: f64, initial_lambda: f64) -> Self {
        PidState {
            kp,
            ki,
            kd,
            integral: 0.0,
            prev_constraint: 0.0,
            lambda: initial_lambda.max(0.0),
        }
    }
}

/// Δ = J − d; I ← (I + Δ)₊; ∂ = (J − J_prev)₊; λ = (K_P Δ + K_I I + K_D ∂)₊.
pub fn pid_lambda_update(state: &PidState, constraint_now: f64, d: f64) -> PidState {
    let delta = constraint_now - d;
    let integral = (state.integral + delta).max(0.0);
    let deriv = (constraint_now - state.prev_constraint).max(0.0);
    let lambda = (state.kp * delta + state.ki * integral + state.kd * deriv).max(0.0);
    PidState {
        integral,
        prev_constraint: constraint_now,
        lambda,
        ..state.clone()
    }
}

/// θ ← θ + η(g − λ g_C^EI).
pub fn pid_step(policy: &SoftmaxPolicy, bundle: &GradientBundle, lambda: f64, lr: f64) -> Result<SoftmaxPolicy> {
    if bundle.g.len() != policy.dim() || bundle.g_c_ei.len() != policy.dim() {
        return Err(MiceError::Dimension {
            what: "gradient",
            expected: policy.dim(),
            got: bundle.g.len(),
        });
    }
    let theta = policy
        .theta
        .iter()
        .zip(bundle.g.iter().zip(&bundle.g_c_ei))
        .map(|(t, (g, gc))| t + lr * (g - lambda * gc))
        .collect();
    policy.with_theta(theta)
}

/// Gradient at θ of the clipped Lagrangian surrogate
/// mean min(r·A, clip(r, 1±ε)·A) with A = A_R − λ·A^EI/(1−γ).
pub fn clipped_lagrangian_gradient(
    theta: &[f64],
    policy: &SoftmaxPolicy,
    batch: &SurrogateBatch,
    lambda: f64,
    clip: f64,
) -> Vec<f64> {
    let na = policy.n_actions;
    let n = batch.len() as f64;
    let mut grad = vec![0.0; theta.len()];
    for i in 0..batch.len() {
        let s = batch.states[i];
        let logits = logits_with(theta, &policy.features, na, s);
        let lp = log_softmax(&logits);
        let p = softmax(&logits);
        let a = batch.actions[i];
        let ratio = (lp[a] - batch.logp_old[i]).exp();
        let adv = batch.adv_r[i] - lambda * batch.adv_c_ei[i] / (1.0 - batch.gamma);
        let clipped = (adv > 0.0 && ratio > 1.0 + clip) || (adv < 0.0 && ratio < 1.0 - clip);
        if clipped {
            continue;
        }
        let w = ratio * adv / n;
        for &(f, x) in &policy.features.rows[s] {
            for b in 0..na {
                grad[f * na + b] += w * x * ((b == a) as u8 as f64 - p[b]);
            }
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportional_only() {
        let s = PidState::new(1.0, 0.0, 0.0, 0.0);
        assert_eq!(pid_lambda_update(&s, 5.0, 2.0).lambda, 3.0);
    }

    #[test]
    fn below_threshold_stays_zero() {
        let mut s = PidState::new(0.25, 0.005, 0.1, 0.0);
        s.prev_constraint = 1.0;
        for j in [1.0, 0.5, 0.2, 0.9] {
            s = pid_lambda_update(&s, j, 2.0);
            assert_eq!(s.integral, 0.0);
            assert_eq!(s.lambda, 0.0);
        }
    }
}
