use serde::{Deserialize, Serialize};

use super::policy::TabularPolicy;
use super::spec::CmdpSpec;
use crate::error::{MiceError, Result};
use crate::rng::{rng_from_seed, sample_categorical, Rng64};

pub const DEFAULT_HORIZON: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub extrinsic_cost: f64,
    /// `None` until the memory module annotates the transition.
    pub intrinsic_cost: Option<f64>,
    pub next_state: usize,
    pub terminal: bool,
}

impl Transition {
    pub fn intrinsic_or_zero(&self) -> f64 {
        self.intrinsic_cost.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// True when the last transition ended in a terminal state.
    pub fn ended_terminal(&self) -> bool {
        self.transitions.last().map(|t| t.terminal).unwrap_or(false)
    }

    /// State after the final transition, if any.
    pub fn final_state(&self) -> Option<usize> {
        self.transitions.last().map(|t| t.next_state)
    }

    pub fn is_chained(&self) -> bool {
        self.transitions
            .windows(2)
            .all(|w| w[0].next_state == w[1].state)
    }
}

/// One environment step drawn from the tabular model.
pub fn step_spec(spec: &CmdpSpec, state: usize, action: usize, rng: &mut Rng64) -> Transition {
    let next_state = sample_categorical(rng, &spec.transition[state][action]);
    Transition {
        state,
        action,
        reward: spec.reward[state][action],
        extrinsic_cost: spec.extrinsic_cost[state][action],
        intrinsic_cost: None,
        next_state,
        terminal: spec.is_terminal(next_state),
    }
}

/// Roll out `policy` from a state drawn from ρ for at most `horizon` steps,
/// stopping early on entering a terminal state.
pub fn sample_trajectory(
    spec: &CmdpSpec,
    policy: &TabularPolicy,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(MiceError::InvalidArgument("horizon must be at least 1".into()));
    }
    policy.check_shape(spec.n_states, spec.n_actions)?;
    let mut rng = rng_from_seed(seed);
    let mut s = sample_categorical(&mut rng, &spec.initial_dist);
    let mut transitions = Vec::with_capacity(horizon.min(4096));
    for _ in 0..horizon {
        if spec.is_terminal(s) {
            break;
        }
        let a = sample_categorical(&mut rng, policy.probs(s));
        let t = step_spec(spec, s, a, &mut rng);
        s = t.next_state;
        let done = t.terminal;
        transitions.push(t);
        if done {
            break;
        }
    }
    Ok(Trajectory { transitions, seed })
}

/// Σ_t γ^t c^E_t over the trajectory.
pub fn discounted_cost_return(traj: &Trajectory, gamma: f64) -> f64 {
    let mut acc = 0.0;
    let mut g = 1.0;
    for t in &traj.transitions {
        acc += g * t.extrinsic_cost;
        g *= gamma;
    }
    acc
}

pub fn discounted_reward_return(traj: &Trajectory, gamma: f64) -> f64 {
    let mut acc = 0.0;
    let mut g = 1.0;
    for t in &traj.transitions {
        acc += g * t.reward;
        g *= gamma;
    }
    acc
}

/// Worst-case contribution of the discounted tail beyond `horizon` for
/// per-step magnitudes bounded by `max_abs`.
pub fn truncation_bound(gamma: f64, horizon: usize, max_abs: f64) -> f64 {
    gamma.powi(horizon as i32) * max_abs / (1.0 - gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn self_loop(cost: f64) -> CmdpSpec {
        CmdpSpec::new(
            1,
            1,
            vec![vec![vec![1.0]]],
            vec![vec![0.0]],
            vec![vec![cost]],
            vec![1.0],
            0.99,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn self_loop_repeats() {
        let spec = self_loop(1.0);
        let traj = sample_trajectory(&spec, &TabularPolicy::uniform(1, 1), 3, 0).unwrap();
        assert_eq!(traj.len(), 3);
        assert!(traj.transitions.iter().all(|t| t == &traj.transitions[0]));
    }

    #[test]
    fn zero_horizon_rejected() {
        let spec = self_loop(1.0);
        assert!(sample_trajectory(&spec, &TabularPolicy::uniform(1, 1), 0, 0).is_err());
    }

    #[test]
    fn discounted_examples() {
        let empty = Trajectory { transitions: vec![], seed: 0 };
        assert_eq!(discounted_cost_return(&empty, 0.5), 0.0);
        let spec = self_loop(1.0);
        let traj = sample_trajectory(&spec, &TabularPolicy::uniform(1, 1), 2, 0).unwrap();
        assert_eq!(discounted_cost_return(&traj, 0.5), 1.5);
    }

    #[test]
    fn terminal_stops_episode() {
        let spec = CmdpSpec::new(
            2,
            1,
            vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]],
            vec![vec![1.0], vec![0.0]],
            vec![vec![0.0], vec![0.0]],
            vec![1.0, 0.0],
            0.9,
            0.0,
        )
        .unwrap()
        .with_terminal(vec![false, true])
        .unwrap();
        let traj = sample_trajectory(&spec, &TabularPolicy::uniform(2, 1), 10, 1).unwrap();
        assert_eq!(traj.len(), 1);
        assert!(traj.ended_terminal());
    }
}
