use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cmdp::TabularPolicy;
use crate::error::{MiceError, Result};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&x| x - lse).collect()
}

/// Sparse per-state feature vectors, shared between policy snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub dim: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl FeatureMap {
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut sparse = Vec::with_capacity(rows.len());
        for r in rows {
            if r.len() != dim {
                return Err(MiceError::Dimension {
                    what: "feature row",
                    expected: dim,
                    got: r.len(),
                });
            }
            sparse.push(
                r.iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0.0)
                    .map(|(i, &x)| (i, x))
                    .collect(),
            );
        }
        Ok(FeatureMap { dim, rows: sparse })
    }

    pub fn one_hot(n_states: usize) -> Self {
        FeatureMap {
            dim: n_states,
            rows: (0..n_states).map(|s| vec![(s, 1.0)]).collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.rows.len()
    }
}

/// π_θ(a|s) ∝ exp(Σ_f φ_f(s) θ[f][a]); θ is stored feature-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    pub theta: Vec<f64>,
    pub n_actions: usize,
    pub features: Arc<FeatureMap>,
}

impl SoftmaxPolicy {
    pub fn zeros(features: Arc<FeatureMap>, n_actions: usize) -> Self {
        SoftmaxPolicy {
            theta: vec![0.0; features.dim * n_actions],
            n_actions,
            features,
        }
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != self.theta.len() {
            return Err(MiceError::Dimension {
                what: "theta",
                expected: self.theta.len(),
                got: theta.len(),
            });
        }
        Ok(SoftmaxPolicy {
            theta,
            n_actions: self.n_actions,
            features: Arc::clone(&self.features),
        })
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn n_states(&self) -> usize {
        self.features.n_states()
    }

    pub fn logits(&self, s: usize) -> Vec<f64> {
        logits_with(&self.theta, &self.features, self.n_actions, s)
    }

    pub fn to_tabular(&self) -> TabularPolicy {
        let probs: Vec<Vec<f64>> = (0..self.n_states()).map(|s| action_dist(self, s)).collect();
        TabularPolicy::new(probs).expect("softmax rows are distributions")
    }
}

pub(crate) fn logits_with(theta: &[f64], features: &FeatureMap, n_actions: usize, s: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_actions];
    for &(f, x) in &features.rows[s] {
        let row = &theta[f * n_actions..(f + 1) * n_actions];
        for (o, w) in out.iter_mut().zip(row) {
            *o += x * w;
        }
    }
    out
}

pub fn action_dist(policy: &SoftmaxPolicy, s: usize) -> Vec<f64> {
    softmax(&policy.logits(s))
}
