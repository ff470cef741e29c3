use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmdp::sample::step_spec;
use crate::cmdp::{exact_policy_eval, truncation_bound, CmdpSpec, TabularPolicy};
use crate::error::{MiceError, Result};
use crate::rng::{child_rng, sample_categorical};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QStarEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n_rollouts: usize,
    pub horizon: usize,
    /// Largest possible contribution of the discounted tail beyond `horizon`.
    pub truncation_bound: f64,
}

/// Where Monte-Carlo rollouts begin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutStart {
    Initial,
    State(usize),
    StateAction(usize, usize),
}

fn rollout_cost(
    spec: &CmdpSpec,
    policy: &TabularPolicy,
    start: RolloutStart,
    horizon: usize,
    seed: u64,
    index: u64,
) -> f64 {
    let mut rng = child_rng(seed, &[index]);
    let (mut s, mut first_action) = match start {
        RolloutStart::Initial => (sample_categorical(&mut rng, &spec.initial_dist), None),
        RolloutStart::State(s) => (s, None),
        RolloutStart::StateAction(s, a) => (s, Some(a)),
    };
    let mut acc = 0.0;
    let mut g = 1.0;
    for _ in 0..horizon {
        if spec.is_terminal(s) {
            break;
        }
        let a = first_action
            .take()
            .unwrap_or_else(|| sample_categorical(&mut rng, policy.probs(s)));
        let t = step_spec(spec, s, a, &mut rng);
        acc += g * t.extrinsic_cost;
        g *= spec.discount;
        s = t.next_state;
    }
    acc
}

/// Monte-Carlo mean and standard error of the discounted extrinsic cost.
pub fn estimate_q_star(
    spec: &CmdpSpec,
    policy: &TabularPolicy,
    start: RolloutStart,
    n_rollouts: usize,
    horizon: usize,
    seed: u64,
) -> Result<QStarEstimate> {
    if n_rollouts == 0 {
        return Err(MiceError::InvalidArgument("n_rollouts must be at least 1".into()));
    }
    if horizon == 0 {
        return Err(MiceError::InvalidArgument("horizon must be at least 1".into()));
    }
    policy.check_shape(spec.n_states, spec.n_actions)?;
    let returns: Vec<f64> = (0..n_rollouts as u64)
        .into_par_iter()
        .map(|i| rollout_cost(spec, policy, start, horizon, seed, i))
        .collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let constant = returns.iter().all(|&x| x == returns[0]);
    let var = if returns.len() > 1 && !constant {
        returns.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let cmax = spec
        .extrinsic_cost
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max);
    Ok(QStarEstimate {
        value: mean,
        std_err: (var / n).sqrt(),
        n_rollouts,
        horizon,
        truncation_bound: truncation_bound(spec.discount, horizon, cmax),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRecord {
    pub iteration: usize,
    pub state: usize,
    pub estimated: f64,
    pub true_value: f64,
    pub bias: f64,
}

pub fn bias_records(iteration: usize, states: &[usize], estimated: &[f64], truth: &[f64]) -> Vec<BiasRecord> {
    states
        .iter()
        .map(|&s| BiasRecord {
            iteration,
            state: s,
            estimated: estimated[s],
            true_value: truth[s],
            bias: estimated[s] - truth[s],
        })
        .collect()
}

/// Per-state bias of an estimated cost value table against the exact V_C^π.
pub fn bias_probe(
    estimated_v: &[f64],
    spec: &CmdpSpec,
    policy: &TabularPolicy,
    probe_states: &[usize],
    iteration: usize,
) -> Result<Vec<BiasRecord>> {
    if estimated_v.len() != spec.n_states {
        return Err(MiceError::Dimension {
            what: "estimated values",
            expected: spec.n_states,
            got: estimated_v.len(),
        });
    }
    if let Some(&bad) = probe_states.iter().find(|&&s| s >= spec.n_states) {
        return Err(MiceError::InvalidArgument(format!("probe state {bad} out of range")));
    }
    let exact = exact_policy_eval(spec, policy)?;
    Ok(bias_records(iteration, probe_states, estimated_v, &exact.v_c))
}
