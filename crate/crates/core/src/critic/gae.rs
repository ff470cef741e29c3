use serde::{Deserialize, Serialize};

use crate::cmdp::{Trajectory, Transition};
use crate::error::{MiceError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaeAdvantages {
    pub adv_r: Vec<f64>,
    pub adv_c_ei: Vec<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub beta: f64,
}

fn lookup(v: &[f64], s: usize) -> Result<f64> {
    v.get(s).copied().ok_or(MiceError::BaselineCoverage { state: s })
}

/// Backward recursion A_t = δ_t + γλ A_{t+1}.
pub fn discounted_sums(deltas: &[f64], factor: f64) -> Vec<f64> {
    let mut out = vec![0.0; deltas.len()];
    let mut acc = 0.0;
    for t in (0..deltas.len()).rev() {
        acc = deltas[t] + factor * acc;
        out[t] = acc;
    }
    out
}

/// TD errors of a per-step signal against a state-value table, bootstrapping
/// from V(s_T) at the end unless the trajectory terminated.
pub fn td_errors<F: Fn(&Transition) -> Result<f64>>(
    traj: &Trajectory,
    v: &[f64],
    gamma: f64,
    signal: F,
) -> Result<Vec<f64>> {
    traj.transitions
        .iter()
        .map(|t| {
            let boot = if t.terminal { 0.0 } else { lookup(v, t.next_state)? };
            Ok(signal(t)? + gamma * boot - lookup(v, t.state)?)
        })
        .collect()
}

pub(crate) fn ei_cost(t: &Transition, beta: f64) -> Result<f64> {
    if beta == 0.0 {
        return Ok(t.extrinsic_cost);
    }
    let ci = t.intrinsic_cost.ok_or(MiceError::MissingIntrinsicCost {
        state: t.state,
        action: t.action,
    })?;
    Ok(t.extrinsic_cost + beta * ci)
}

/// GAE over reward and extrinsic-intrinsic cost, with
/// δ^EI = c^E + βc^I + γV_C(s') − V_C(s) against the extrinsic cost baseline.
pub fn gae_advantages(
    traj: &Trajectory,
    v_c: &[f64],
    v_r: &[f64],
    beta: f64,
    gamma: f64,
    lambda: f64,
) -> Result<GaeAdvantages> {
    let dr = td_errors(traj, v_r, gamma, |t| Ok(t.reward))?;
    let dc = td_errors(traj, v_c, gamma, |t| ei_cost(t, beta))?;
    Ok(GaeAdvantages {
        adv_r: discounted_sums(&dr, gamma * lambda),
        adv_c_ei: discounted_sums(&dc, gamma * lambda),
        lambda,
        gamma,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj() -> Trajectory {
        let steps = [(0, 1.0, 0.5, 0.2, 1), (1, 0.0, 1.0, 0.0, 2), (2, 2.0, 0.0, 1.0, 0)];
        Trajectory {
            transitions: steps
                .iter()
                .map(|&(s, r, c, ci, sp)| Transition {
                    state: s,
                    action: 0,
                    reward: r,
                    extrinsic_cost: c,
                    intrinsic_cost: Some(ci),
                    next_state: sp,
                    terminal: false,
                })
                .collect(),
            seed: 0,
        }
    }

    #[test]
    fn lambda_zero_is_td_error() {
        let v = [0.3, -0.2, 1.1];
        let g = gae_advantages(&traj(), &v, &v, 0.5, 0.9, 0.0).unwrap();
        let t = &traj().transitions[1];
        let expect = t.extrinsic_cost + 0.5 * 0.0 + 0.9 * v[2] - v[1];
        assert!((g.adv_c_ei[1] - expect).abs() < 1e-14);
    }

    #[test]
    fn lambda_one_zero_baseline_is_cost_to_go() {
        let v = [0.0; 3];
        let g = gae_advantages(&traj(), &v, &v, 0.0, 0.5, 1.0).unwrap();
        assert!((g.adv_c_ei[0] - (0.5 + 0.5 * 1.0 + 0.25 * 0.0)).abs() < 1e-14);
    }

    #[test]
    fn coverage_gap_reported() {
        let v = [0.0; 2];
        assert!(matches!(
            gae_advantages(&traj(), &v, &[0.0; 3], 0.0, 0.9, 0.9),
            Err(MiceError::BaselineCoverage { state: 2 })
        ));
    }
}
