//! Tabular extrinsic-intrinsic Q-learning with min targets and exploring
//! starts, checked against value-iteration oracles.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ConvergenceConfig;
use crate::cmdp::exact::{optimal_min_q_with_cost, table_sup_diff};
use crate::cmdp::sample::step_spec;
use crate::cmdp::{optimal_min_cost_q, CmdpSpec};
use crate::critic::{beta_update, ei_q_update, BetaState, EiQTable, NextValue, StepSchedule};
use crate::error::{MiceError, Result};
use crate::memory::{
    embed, intrinsic_cost_raw, make_projection, normalize_intrinsic, rebuild_memory, FlashbulbMemory,
    IntrinsicCostConfig,
};
use crate::rng::{child_rng, derive_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMode {
    /// β adapted each round with its γⁿ discount.
    Mice,
    /// β ≡ 0.
    Baseline,
    /// β ≡ 1, never updated.
    ConstantBeta,
}

impl ConvergenceMode {
    pub fn name(&self) -> &'static str {
        match self {
            ConvergenceMode::Mice => "mice",
            ConvergenceMode::Baseline => "baseline",
            ConvergenceMode::ConstantBeta => "constant_beta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub mode: String,
    pub updates: usize,
    pub error: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub mode: ConvergenceMode,
    pub updates: usize,
    /// ‖Q − Q*_C‖_∞.
    pub final_error: f64,
    /// min over (s, a) of Q − Q*_C.
    pub min_gap: f64,
    /// ‖Q − Q̃‖_∞ against the oracle for C + β c^I with the final c^I table.
    pub modified_oracle_error: f64,
    pub final_beta: f64,
    pub trajectory: Vec<ConvergencePoint>,
    pub q: Vec<Vec<f64>>,
}

fn min_row(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::INFINITY, f64::min)
}

fn one_hot(n: usize, s: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[s] = 1.0;
    v
}

pub fn convergence_suite(spec: &CmdpSpec, cfg: &ConvergenceConfig, mode: ConvergenceMode) -> Result<ConvergenceReport> {
    if cfg.round_len == 0 || cfg.updates == 0 {
        return Err(MiceError::InvalidArgument("updates and round_len must be positive".into()));
    }
    let n = spec.n_states;
    let na = spec.n_actions;
    let q_star = optimal_min_cost_q(spec, 1e-13)?;
    let v_star: Vec<f64> = q_star.iter().map(|r| min_row(r)).collect();
    let mut table = EiQTable::new(n, na, StepSchedule::RobbinsMonro { exponent: cfg.exponent })?;
    let beta0 = match mode {
        ConvergenceMode::Mice => cfg.beta0,
        ConvergenceMode::Baseline => 0.0,
        ConvergenceMode::ConstantBeta => 1.0,
    };
    let mut beta = BetaState::new(beta0, spec.discount, cfg.alpha);
    let features: Vec<Vec<f64>> = (0..n).map(|s| one_hot(n, s)).collect();
    let m = cfg.embedding_dim.clamp(1, n);
    let proj = make_projection(n, m, derive_seed(cfg.seed, &[0x636f6e76]))?;
    let mut ic = IntrinsicCostConfig::new(cfg.xi, cfg.k)?;
    let mut memory = FlashbulbMemory::empty(m);
    let mut unsafe_prev: Vec<Vec<f64>> = Vec::new();
    let rounds = cfg.updates.div_ceil(cfg.round_len);
    let mut done = 0usize;
    let mut trajectory = Vec::new();
    let record_every = cfg.record_every.max(1);

    for r in 0..rounds {
        if r > 0 {
            memory = rebuild_memory(&unsafe_prev, &proj, r - 1, None, derive_seed(cfg.seed, &[0x6d]))?;
        }
        let mut raw_cache: HashMap<usize, f64> = HashMap::new();
        let mut rng = child_rng(cfg.seed, &[r as u64]);
        let mut unsafe_cur = Vec::new();
        let (mut ci_sum, mut ci_n) = (0.0, 0usize);
        let len = cfg.round_len.min(cfg.updates - done);
        for _ in 0..len {
            let s = rng.random_range(0..n);
            let a = rng.random_range(0..na);
            let mut t = step_spec(spec, s, a, &mut rng);
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
            t.intrinsic_cost = Some(ci);
            ci_sum += ci;
            ci_n += 1;
            if t.extrinsic_cost > 0.0 {
                unsafe_cur.push(features[s].clone());
            }
            ei_q_update(&mut table, &t, &beta, NextValue::Min)?;
            done += 1;
            if done.is_multiple_of(record_every) || done == cfg.updates {
                trajectory.push(ConvergencePoint {
                    mode: mode.name().into(),
                    updates: done,
                    error: table_sup_diff(&table.q, &q_star),
                    beta: beta.beta,
                });
            }
        }
        unsafe_prev = unsafe_cur;
        if mode == ConvergenceMode::Mice {
            let eps = spec
                .initial_dist
                .iter()
                .enumerate()
                .map(|(s, p)| p * (min_row(&table.q[s]) - v_star[s]))
                .sum::<f64>();
            beta = beta_update(&beta, eps, ci_sum / ci_n.max(1) as f64)?;
        }
    }

    // fixed point of the last round's cost C + β c^I
    let scale = ic.scale();
    let ci_final: Vec<f64> = (0..n)
        .map(|s| {
            let raw = intrinsic_cost_raw(&memory, &embed(&proj, &features[s])?, &ic)?;
            Ok(if raw == 0.0 { 0.0 } else { raw / scale })
        })
        .collect::<Result<_>>()?;
    let modified: Vec<Vec<f64>> = spec
        .extrinsic_cost
        .iter()
        .zip(&ci_final)
        .map(|(row, c)| row.iter().map(|x| x + beta.beta * c).collect())
        .collect();
    let q_mod = optimal_min_q_with_cost(spec, &modified, 1e-13)?;
    let min_gap = table
        .q
        .iter()
        .zip(&q_star)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y))
        .fold(f64::INFINITY, f64::min);
    Ok(ConvergenceReport {
        mode,
        updates: done,
        final_error: table_sup_diff(&table.q, &q_star),
        min_gap,
        modified_oracle_error: table_sup_diff(&table.q, &q_mod),
        final_beta: beta.beta,
        trajectory,
        q: table.q,
    })
}
