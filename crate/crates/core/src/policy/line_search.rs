use serde::{Deserialize, Serialize};

use super::batch::{surrogate_values, GradientBundle, SurrogateBatch};
use super::cpo::{Branch, TrustRegionConfig};
use super::divergence::kl_tv_rows;
use super::softmax::{logits_with, softmax, SoftmaxPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSearchReport {
    pub theta: Vec<f64>,
    pub accepted: bool,
    pub backtracks: usize,
    pub step_fraction: f64,
    /// Batch-averaged KL(π_new‖π_k) of the returned parameters.
    pub kl: f64,
    pub surrogate_reward: f64,
    pub surrogate_cost: f64,
}

/// Batch-averaged KL(π_θ‖π_k) over the sampled states.
pub fn batch_kl(theta: &[f64], policy: &SoftmaxPolicy, weights: &[f64]) -> f64 {
    let mut kl = 0.0;
    for (s, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let new = softmax(&logits_with(theta, &policy.features, policy.n_actions, s));
        let old = softmax(&policy.logits(s));
        kl += w * kl_tv_rows(&new, &old).0;
    }
    kl
}

/// Backtracking acceptance of θ_k + κ^j·step: KL ≤ φ, and on the feasible
/// branch the surrogate constraint may not exceed max(c, 0).
pub fn line_search_apply(
    policy: &SoftmaxPolicy,
    step: &[f64],
    batch: &SurrogateBatch,
    cfg: &TrustRegionConfig,
    bundle: &GradientBundle,
    d: f64,
    branch: Branch,
) -> LineSearchReport {
    let weights = batch.state_weights(policy.n_states());
    let limit = bundle.c_surplus.max(0.0);
    let mut frac = 1.0;
    for j in 0..cfg.max_backtracks.max(1) {
        let theta: Vec<f64> = policy.theta.iter().zip(step).map(|(t, s)| t + frac * s).collect();
        let kl = batch_kl(&theta, policy, &weights);
        let (sr, sc) = surrogate_values(&theta, policy, batch, d);
        let cost_ok = branch == Branch::Recovery || sc <= limit + 1e-12;
        if kl <= cfg.phi && cost_ok && kl.is_finite() {
            return LineSearchReport {
                theta,
                accepted: true,
                backtracks: j,
                step_fraction: frac,
                kl,
                surrogate_reward: sr,
                surrogate_cost: sc,
            };
        }
        frac *= cfg.backtrack_coef;
    }
    let (sr, sc) = surrogate_values(&policy.theta, policy, batch, d);
    LineSearchReport {
        theta: policy.theta.clone(),
        accepted: false,
        backtracks: cfg.max_backtracks.max(1),
        step_fraction: 0.0,
        kl: 0.0,
        surrogate_reward: sr,
        surrogate_cost: sc,
    }
}
