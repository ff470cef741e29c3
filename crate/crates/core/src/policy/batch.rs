use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::softmax::{log_softmax, logits_with, softmax, SoftmaxPolicy};
use crate::cmdp::Trajectory;
use crate::critic::GaeAdvantages;
use crate::error::{MiceError, Result};

/// Flattened on-policy samples with advantages and behaviour log-probs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateBatch {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub adv_r: Vec<f64>,
    pub adv_c_ei: Vec<f64>,
    pub logp_old: Vec<f64>,
    /// Estimated J_C(π_k) from the same samples.
    pub j_c_hat: f64,
    pub gamma: f64,
}

impl SurrogateBatch {
    pub fn from_rollouts(
        policy: &SoftmaxPolicy,
        trajs: &[Trajectory],
        advs: &[GaeAdvantages],
        j_c_hat: f64,
        gamma: f64,
    ) -> Result<Self> {
        if trajs.len() != advs.len() {
            return Err(MiceError::Dimension {
                what: "advantage sets",
                expected: trajs.len(),
                got: advs.len(),
            });
        }
        let mut b = SurrogateBatch {
            states: Vec::new(),
            actions: Vec::new(),
            adv_r: Vec::new(),
            adv_c_ei: Vec::new(),
            logp_old: Vec::new(),
            j_c_hat,
            gamma,
        };
        let logp: Vec<Vec<f64>> = (0..policy.n_states())
            .map(|s| log_softmax(&policy.logits(s)))
            .collect();
        for (traj, adv) in trajs.iter().zip(advs) {
            if adv.adv_r.len() != traj.len() || adv.adv_c_ei.len() != traj.len() {
                return Err(MiceError::Dimension {
                    what: "advantages per trajectory",
                    expected: traj.len(),
                    got: adv.adv_r.len(),
                });
            }
            for (i, t) in traj.transitions.iter().enumerate() {
                b.states.push(t.state);
                b.actions.push(t.action);
                b.adv_r.push(adv.adv_r[i]);
                b.adv_c_ei.push(adv.adv_c_ei[i]);
                b.logp_old.push(logp[t.state][t.action]);
            }
        }
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Empirical state distribution of the batch, indexed by state.
    pub fn state_weights(&self, n_states: usize) -> Vec<f64> {
        let mut w = vec![0.0; n_states];
        let inc = 1.0 / self.len() as f64;
        for &s in &self.states {
            w[s] += inc;
        }
        w
    }

    fn state_counts(&self) -> BTreeMap<usize, usize> {
        let mut m = BTreeMap::new();
        for &s in &self.states {
            *m.entry(s).or_insert(0) += 1;
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBundle {
    pub g: Vec<f64>,
    pub g_c_ei: Vec<f64>,
    /// Linearization constant of the surrogate constraint at θ_k:
    /// Ĵ_C − d + mean(A^EI)/(1−γ).
    pub c_surplus: f64,
    pub sample_size: usize,
}

/// Surrogate objectives at θ: (mean ratio·A_R, Ĵ_C − d + mean(ratio·A^EI)/(1−γ)).
pub fn surrogate_values(theta: &[f64], policy: &SoftmaxPolicy, batch: &SurrogateBatch, d: f64) -> (f64, f64) {
    let n = batch.len() as f64;
    let mut cache: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut sr = 0.0;
    let mut sc = 0.0;
    for i in 0..batch.len() {
        let s = batch.states[i];
        let lp = cache
            .entry(s)
            .or_insert_with(|| log_softmax(&logits_with(theta, &policy.features, policy.n_actions, s)));
        let ratio = (lp[batch.actions[i]] - batch.logp_old[i]).exp();
        sr += ratio * batch.adv_r[i];
        sc += ratio * batch.adv_c_ei[i];
    }
    (
        sr / n,
        batch.j_c_hat - d + sc / (n * (1.0 - batch.gamma)),
    )
}

/// Likelihood-ratio gradients of both surrogates at θ_k.
pub fn surrogate_gradients(policy: &SoftmaxPolicy, batch: &SurrogateBatch, d: f64) -> Result<GradientBundle> {
    if batch.is_empty() {
        return Err(MiceError::EmptyBatch);
    }
    let na = policy.n_actions;
    let n = batch.len() as f64;
    let scale_c = 1.0 / (1.0 - batch.gamma);
    let mut g = vec![0.0; policy.dim()];
    let mut gc = vec![0.0; policy.dim()];
    let probs: BTreeMap<usize, Vec<f64>> = batch
        .state_counts()
        .keys()
        .map(|&s| (s, softmax(&policy.logits(s))))
        .collect();
    let mut mean_c = 0.0;
    for i in 0..batch.len() {
        let s = batch.states[i];
        let p = &probs[&s];
        let (ar, ac) = (batch.adv_r[i] / n, batch.adv_c_ei[i] * scale_c / n);
        mean_c += batch.adv_c_ei[i];
        for &(f, x) in &policy.features.rows[s] {
            for b in 0..na {
                let score = x * ((b == batch.actions[i]) as u8 as f64 - p[b]);
                g[f * na + b] += score * ar;
                gc[f * na + b] += score * ac;
            }
        }
    }
    Ok(GradientBundle {
        g,
        g_c_ei: gc,
        c_surplus: batch.j_c_hat - d + mean_c * scale_c / n,
        sample_size: batch.len(),
    })
}

/// Batch-averaged Fisher information of the softmax policy at θ_k,
/// grouped by distinct state.
#[derive(Debug, Clone)]
pub struct FisherContext {
    n_actions: usize,
    dim: usize,
    entries: Vec<(f64, usize, Vec<f64>)>,
    features: std::sync::Arc<super::softmax::FeatureMap>,
}

impl FisherContext {
    pub fn new(policy: &SoftmaxPolicy, batch: &SurrogateBatch) -> Result<Self> {
        if batch.is_empty() {
            return Err(MiceError::EmptyBatch);
        }
        let n = batch.len() as f64;
        let entries = batch
            .state_counts()
            .into_iter()
            .map(|(s, c)| (c as f64 / n, s, softmax(&policy.logits(s))))
            .collect();
        Ok(FisherContext {
            n_actions: policy.n_actions,
            dim: policy.dim(),
            entries,
            features: std::sync::Arc::clone(&policy.features),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// (F + damping·I)·vec.
pub fn fisher_vector_product(ctx: &FisherContext, vec: &[f64], damping: f64) -> Vec<f64> {
    assert_eq!(vec.len(), ctx.dim, "fisher_vector_product dimension");
    let na = ctx.n_actions;
    let mut out: Vec<f64> = vec.iter().map(|x| damping * x).collect();
    let mut z = vec![0.0; na];
    for (w, s, p) in &ctx.entries {
        let feats = &ctx.features.rows[*s];
        z.iter_mut().for_each(|x| *x = 0.0);
        for &(f, x) in feats {
            for b in 0..na {
                z[b] += x * vec[f * na + b];
            }
        }
        let pz: f64 = p.iter().zip(&z).map(|(a, b)| a * b).sum();
        for &(f, x) in feats {
            for b in 0..na {
                out[f * na + b] += w * x * p[b] * (z[b] - pz);
            }
        }
    }
    out
}
