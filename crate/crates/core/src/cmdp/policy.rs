use serde::{Deserialize, Serialize};

use crate::error::{MiceError, Result};

pub const POLICY_TOL: f64 = 1e-9;

/// Explicit action distribution per state, `probs[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TabularPolicy {
    probs: Vec<Vec<f64>>,
}

impl TabularPolicy {
    pub fn new(probs: Vec<Vec<f64>>) -> Result<Self> {
        let n_actions = probs.first().map(|r| r.len()).unwrap_or(0);
        for (s, row) in probs.iter().enumerate() {
            if row.len() != n_actions || n_actions == 0 {
                return Err(MiceError::Dimension {
                    what: "policy row",
                    expected: n_actions,
                    got: row.len(),
                });
            }
            let mut sum = 0.0;
            for &p in row {
                if !p.is_finite() || p < 0.0 {
                    return Err(MiceError::InvalidDistribution {
                        what: format!("policy row {s}"),
                        sum: f64::NAN,
                    });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > POLICY_TOL {
                return Err(MiceError::InvalidDistribution {
                    what: format!("policy row {s}"),
                    sum,
                });
            }
        }
        Ok(TabularPolicy { probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        TabularPolicy {
            probs: vec![vec![1.0 / n_actions as f64; n_actions]; n_states],
        }
    }

    /// Deterministic policy from an action per state.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Self {
        let probs = actions
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; n_actions];
                row[a] = 1.0;
                row
            })
            .collect();
        TabularPolicy { probs }
    }

    /// Softmax of a logits table.
    pub fn from_logits(logits: &[Vec<f64>]) -> Self {
        let probs = logits.iter().map(|row| crate::policy::softmax(row)).collect();
        TabularPolicy { probs }
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn probs(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn check_shape(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.n_states() != n_states {
            return Err(MiceError::Dimension {
                what: "policy states",
                expected: n_states,
                got: self.n_states(),
            });
        }
        if self.n_actions() != n_actions {
            return Err(MiceError::Dimension {
                what: "policy actions",
                expected: n_actions,
                got: self.n_actions(),
            });
        }
        Ok(())
    }
}
