use crate::cmdp::{Trajectory, Transition};
use crate::error::Result;

use super::gae::{discounted_sums, td_errors};

/// λ-returns G_t = A_t + V(s_t) for a per-step signal.
pub fn lambda_returns<F: Fn(&Transition) -> Result<f64>>(
    traj: &Trajectory,
    v: &[f64],
    gamma: f64,
    lambda: f64,
    signal: F,
) -> Result<Vec<f64>> {
    let deltas = td_errors(traj, v, gamma, signal)?;
    let adv = discounted_sums(&deltas, gamma * lambda);
    Ok(traj
        .transitions
        .iter()
        .zip(adv)
        .map(|(t, a)| a + v[t.state])
        .collect())
}

/// Least-squares fit of a one-hot (tabular) value function to λ-returns:
/// each visited state gets the mean of its targets, unvisited states keep
/// their previous value.
pub fn fit_tabular_values<F: Fn(&Transition) -> Result<f64> + Copy>(
    prev: &[f64],
    batch: &[Trajectory],
    gamma: f64,
    lambda: f64,
    signal: F,
) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; prev.len()];
    let mut counts = vec![0u64; prev.len()];
    for traj in batch {
        let g = lambda_returns(traj, prev, gamma, lambda, signal)?;
        for (t, x) in traj.transitions.iter().zip(g) {
            sums[t.state] += x;
            counts[t.state] += 1;
        }
    }
    Ok(prev
        .iter()
        .enumerate()
        .map(|(s, &p)| if counts[s] > 0 { sums[s] / counts[s] as f64 } else { p })
        .collect())
}
