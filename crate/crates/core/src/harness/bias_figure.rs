//! Underestimation probe: tabular cost Q-learning whose bootstrap takes the
//! minimum over noisy action values, with and without the balanced
//! intrinsic cost.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::BiasFigureConfig;
use crate::cmdp::optimal_min_cost_q;
use crate::cmdp::sample::step_spec;
use crate::critic::{beta_update, BetaState, EiQTable, StepSchedule};
use crate::envs::{GridHazardWorld, TabularEnv};
use crate::error::{MiceError, Result};
use crate::memory::{
    embed, intrinsic_cost_raw, make_projection, normalize_intrinsic, rebuild_memory, FlashbulbMemory,
    IntrinsicCostConfig,
};
use crate::rng::{child_rng, derive_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasVariant {
    /// β ≡ 0.
    Baseline,
    Mice,
    /// The oracle table itself, never updated.
    Exact,
}

impl BiasVariant {
    pub fn name(&self) -> &'static str {
        match self {
            BiasVariant::Baseline => "baseline",
            BiasVariant::Mice => "mice",
            BiasVariant::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub variant: String,
    pub seed: u64,
    pub iteration: usize,
    pub state: usize,
    pub estimated: f64,
    #[serde(rename = "true")]
    pub true_value: f64,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedBias {
    pub seed: u64,
    /// Mean over the final third of iterations of the state-averaged bias.
    pub baseline: f64,
    pub mice: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasFigureOutput {
    pub rows: Vec<BiasRow>,
    pub per_seed: Vec<SeedBias>,
}

impl BiasFigureOutput {
    pub fn mean_baseline(&self) -> f64 {
        self.per_seed.iter().map(|s| s.baseline).sum::<f64>() / self.per_seed.len().max(1) as f64
    }

    pub fn mean_mice(&self) -> f64 {
        self.per_seed.iter().map(|s| s.mice).sum::<f64>() / self.per_seed.len().max(1) as f64
    }

    /// Seeds where MICE's |bias| is strictly below the baseline's.
    pub fn mice_wins(&self) -> usize {
        self.per_seed.iter().filter(|s| s.mice.abs() < s.baseline.abs()).count()
    }
}

/// Per-iteration state-averaged bias of one variant.
pub fn run_bias_variant(cfg: &BiasFigureConfig, seed: u64, variant: BiasVariant) -> Result<Vec<BiasRow>> {
    if !(cfg.noise_std >= 0.0) {
        return Err(MiceError::InvalidArgument("noise_std must be non-negative".into()));
    }
    let world = GridHazardWorld::generate(&cfg.env, cfg.layout_seed, cfg.gamma)?;
    let spec = world.to_cmdp();
    let (n, na) = (spec.n_states, spec.n_actions);
    let q_star = optimal_min_cost_q(&spec, 1e-12)?;
    let v_star: Vec<f64> = q_star
        .iter()
        .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let mut table = EiQTable::from_table(q_star.clone(), StepSchedule::Constant { alpha: cfg.alpha })?;
    let beta0 = if variant == BiasVariant::Mice { cfg.beta0 } else { 0.0 };
    let mut beta = BetaState::new(beta0, cfg.gamma, cfg.beta_alpha);
    let features: Vec<Vec<f64>> = (0..n).map(|s| world.state_features(s)).collect();
    let m = cfg.memory.embedding_dim.clamp(1, features[0].len());
    let proj = make_projection(features[0].len(), m, derive_seed(seed, &[0x70]))?;
    let mut ic = IntrinsicCostConfig::new(cfg.memory.xi, cfg.memory.k)?;
    let mut memory = FlashbulbMemory::empty(m);
    let mut unsafe_prev: Vec<Vec<f64>> = Vec::new();
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| MiceError::InvalidArgument(e.to_string()))?;
    let mut rows = Vec::with_capacity(cfg.iterations * n);

    for it in 0..cfg.iterations {
        if it > 0 {
            memory = rebuild_memory(&unsafe_prev, &proj, it - 1, cfg.memory.capacity, derive_seed(seed, &[0x6d]))?;
        }
        // identical stream for every variant of the same seed
        let mut rng = child_rng(seed, &[it as u64]);
        let mut raw_cache: HashMap<usize, f64> = HashMap::new();
        let mut unsafe_cur = Vec::new();
        let mut ci_sum = 0.0;
        for _ in 0..cfg.updates_per_iteration {
            let s = rng.random_range(0..n);
            let a = rng.random_range(0..na);
            let t = step_spec(&spec, s, a, &mut rng);
            let noisy_min = table.q[t.next_state]
                .iter()
                .map(|q| q + rng.sample(noise))
                .fold(f64::INFINITY, f64::min);
            let ci = if memory.is_empty() {
                0.0
            } else {
                let raw = match raw_cache.get(&s) {
                    Some(&x) => x,
                    None => {
                        let x = intrinsic_cost_raw(&memory, &embed(&proj, &features[s])?, &ic)?;
                        raw_cache.insert(s, x);
                        x
                    }
                };
                normalize_intrinsic(raw, &mut ic)
            };
            ci_sum += ci;
            if t.extrinsic_cost > 0.0 {
                unsafe_cur.push(features[s].clone());
            }
            if variant != BiasVariant::Exact {
                let boot = if t.terminal { 0.0 } else { cfg.gamma * noisy_min };
                table.apply_target(s, a, t.extrinsic_cost + beta.beta * ci + boot);
            }
        }
        unsafe_prev = unsafe_cur;
        let est: Vec<f64> = table
            .q
            .iter()
            .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        if variant == BiasVariant::Mice {
            let eps = est.iter().zip(&v_star).map(|(e, v)| e - v).sum::<f64>() / n as f64;
            let mean_ci = ci_sum / cfg.updates_per_iteration.max(1) as f64;
            beta = beta_update(&beta, eps, mean_ci)?;
        }
        for s in 0..n {
            rows.push(BiasRow {
                variant: variant.name().into(),
                seed,
                iteration: it,
                state: s,
                estimated: est[s],
                true_value: v_star[s],
                bias: est[s] - v_star[s],
            });
        }
    }
    Ok(rows)
}

/// Mean state-averaged bias over the final third of iterations.
pub fn final_third_bias(rows: &[BiasRow], iterations: usize) -> f64 {
    let start = iterations - iterations / 3;
    let sel: Vec<f64> = rows.iter().filter(|r| r.iteration >= start).map(|r| r.bias).collect();
    sel.iter().sum::<f64>() / sel.len().max(1) as f64
}

/// Paired baseline / MICE runs for every seed.
pub fn run_bias_figure(cfg: &BiasFigureConfig) -> Result<BiasFigureOutput> {
    if cfg.iterations < 3 || cfg.seeds.is_empty() {
        return Err(MiceError::InvalidArgument("need ≥3 iterations and ≥1 seed".into()));
    }
    let mut per: Vec<(u64, Vec<BiasRow>, Vec<BiasRow>)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            Ok((
                seed,
                run_bias_variant(cfg, seed, BiasVariant::Baseline)?,
                run_bias_variant(cfg, seed, BiasVariant::Mice)?,
            ))
        })
        .collect::<Result<_>>()?;
    per.sort_by_key(|p| p.0);
    let mut out = BiasFigureOutput {
        rows: Vec::new(),
        per_seed: Vec::new(),
    };
    for (seed, base, mice) in per {
        out.per_seed.push(SeedBias {
            seed,
            baseline: final_third_bias(&base, cfg.iterations),
            mice: final_third_bias(&mice, cfg.iterations),
        });
        out.rows.extend(base);
        out.rows.extend(mice);
    }
    Ok(out)
}
