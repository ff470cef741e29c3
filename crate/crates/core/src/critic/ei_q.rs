use serde::{Deserialize, Serialize};

use super::beta::BetaState;
use crate::cmdp::Transition;
use crate::error::{MiceError, Result};

/// Step-size rule for tabular updates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StepSchedule {
    Constant { alpha: f64 },
    /// α_t(s,a) = 1 / (1 + visits(s,a))^exponent
    RobbinsMonro { exponent: f64 },
}

impl StepSchedule {
    pub fn alpha(&self, visits: u64) -> f64 {
        match *self {
            StepSchedule::Constant { alpha } => alpha,
            StepSchedule::RobbinsMonro { exponent } => 1.0 / (1.0 + visits as f64).powf(exponent),
        }
    }
}

/// How the next-state value enters the target.
#[derive(Debug, Clone, Copy)]
pub enum NextValue<'a> {
    /// E_{a'~π}[Q(s', a')]
    Expectation(&'a [f64]),
    /// min_{a'} Q(s', a')
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EiQTable {
    pub q: Vec<Vec<f64>>,
    pub schedule: StepSchedule,
    pub update_count: u64,
    pub visits: Vec<Vec<u64>>,
}

impl EiQTable {
    pub fn new(n_states: usize, n_actions: usize, schedule: StepSchedule) -> Result<Self> {
        Self::from_table(vec![vec![0.0; n_actions]; n_states], schedule)
    }

    pub fn from_table(q: Vec<Vec<f64>>, schedule: StepSchedule) -> Result<Self> {
        if let StepSchedule::Constant { alpha } = schedule {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(MiceError::InvalidArgument(format!("step size {alpha} outside (0, 1]")));
            }
        }
        let visits = q.iter().map(|r| vec![0; r.len()]).collect();
        Ok(EiQTable {
            q,
            schedule,
            update_count: 0,
            visits,
        })
    }

    pub fn next_value(&self, s: usize, next: NextValue<'_>) -> f64 {
        match next {
            NextValue::Expectation(p) => self.q[s].iter().zip(p).map(|(q, p)| q * p).sum(),
            NextValue::Min => self.q[s].iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Q[s][a] ← (1−α)Q[s][a] + α·target. Returns the α used.
    pub fn apply_target(&mut self, s: usize, a: usize, target: f64) -> f64 {
        let alpha = self.schedule.alpha(self.visits[s][a]);
        self.q[s][a] = (1.0 - alpha) * self.q[s][a] + alpha * target;
        self.visits[s][a] += 1;
        self.update_count += 1;
        alpha
    }
}

/// c^E + β c^I + γ·V(s'), with no bootstrap on terminal transitions.
pub fn ei_target(
    table: &EiQTable,
    t: &Transition,
    beta: f64,
    gamma: f64,
    next: NextValue<'_>,
) -> Result<f64> {
    let ci = t
        .intrinsic_cost
        .ok_or(MiceError::MissingIntrinsicCost {
            state: t.state,
            action: t.action,
        })?;
    if ci < 0.0 {
        return Err(MiceError::InvalidArgument(format!("negative intrinsic cost {ci}")));
    }
    let boot = if t.terminal {
        0.0
    } else {
        gamma * table.next_value(t.next_state, next)
    };
    Ok(t.extrinsic_cost + beta * ci + boot)
}

/// Extrinsic-intrinsic TD update. Returns the target used.
pub fn ei_q_update(
    table: &mut EiQTable,
    t: &Transition,
    beta: &BetaState,
    next: NextValue<'_>,
) -> Result<f64> {
    let target = ei_target(table, t, beta.beta, beta.gamma, next)?;
    table.apply_target(t.state, t.action, target);
    Ok(target)
}

/// Q'_T = Q_T − α(Q_n − Q*).
pub fn modified_target(target: f64, prev_estimate: f64, q_star: f64, alpha: f64) -> f64 {
    target - alpha * (prev_estimate - q_star)
}
