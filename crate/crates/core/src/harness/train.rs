//! Per-seed training pipeline: sample, remember, annotate, adapt β, fit
//! critics, estimate advantages, update the policy.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BiasReference, ExperimentConfig, IntrinsicMode, OptimizerKind};
use crate::cmdp::{
    exact_policy_eval, CmdpSpec, TabularPolicy, Trajectory, Transition,
};
use crate::critic::{
    beta_update, estimate_q_star, fit_tabular_values, gae_advantages, BetaState, RolloutStart,
};
use crate::envs::{Env, TabularEnv};
use crate::error::{MiceError, Result};
use crate::memory::{
    embed, intrinsic_cost_raw, make_projection, normalize_intrinsic, rebuild_memory, FlashbulbMemory,
    IntrinsicCostConfig, ProjectionMatrix,
};
use crate::policy::{
    batch_kl, clipped_lagrangian_gradient, cpo_dual_solve, fisher_vector_product, line_search_apply,
    pid_lambda_update, pid_step, recovery_step, surrogate_gradients, Branch, FeatureMap, FisherContext,
    PidState, SoftmaxPolicy, SurrogateBatch,
};
use crate::rng::{child_rng, derive_seed, sample_categorical, Rng64};

/// One row per iteration per seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: usize,
    pub seed: u64,
    pub j_r_hat: f64,
    pub j_c_hat: f64,
    pub j_r_exact: f64,
    pub j_c_exact: f64,
    pub beta: f64,
    pub mean_ci: f64,
    pub memory_size: usize,
    /// PID multiplier, or λ* of the trust-region dual.
    pub lambda: f64,
    /// ν* of the trust-region dual (zero for PID variants).
    pub nu: f64,
    pub kl: f64,
    pub violation: bool,
    pub bias: f64,
    pub branch: String,
    pub accepted: bool,
    pub status: String,
}

/// Optimizer internals of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub branch: String,
    pub lambda_star: f64,
    pub nu_star: f64,
    pub q: f64,
    pub u: f64,
    pub v: f64,
    pub kl: f64,
    pub c_surplus: f64,
}

/// Everything needed to re-check an update k → k+1 exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub iteration: usize,
    pub before: TabularPolicy,
    pub after: TabularPolicy,
    pub beta: f64,
    /// Normalized c^I per state, frozen with the scale in force after annotation.
    pub ci_table: Vec<f64>,
    pub branch: Branch,
    pub accepted: bool,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub metrics: Vec<MetricsRow>,
    pub trace: Vec<TraceRow>,
    pub updates: Vec<UpdateRecord>,
    /// Error kind and message if the seed aborted.
    pub failure: Option<String>,
    pub spec: CmdpSpec,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub runs: Vec<SeedRun>,
    pub threshold: f64,
}

impl TrainOutput {
    pub fn metrics(&self) -> Vec<&MetricsRow> {
        self.runs.iter().flat_map(|r| r.metrics.iter()).collect()
    }
}

/// Run every configured seed in parallel; results are ordered by seed.
pub fn train(cfg: &ExperimentConfig, record_updates: bool) -> Result<TrainOutput> {
    cfg.validate()?;
    let mut runs: Vec<SeedRun> = cfg
        .seeds
        .par_iter()
        .map(|&seed| train_seed(cfg, seed, record_updates))
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|r| r.seed);
    Ok(TrainOutput {
        runs,
        threshold: cfg.env.threshold(),
    })
}

/// Roll out a tabular policy in the environment model.
pub fn env_rollout(env: &Env, policy: &TabularPolicy, rng: &mut Rng64, seed: u64) -> Result<Trajectory> {
    let mut s = env.reset(rng);
    let mut transitions = Vec::with_capacity(env.horizon());
    for _ in 0..env.horizon() {
        let a = sample_categorical(rng, policy.probs(s));
        let t = env.step(s, a, rng)?;
        s = t.next_state;
        let done = t.terminal;
        transitions.push(t);
        if done {
            break;
        }
    }
    Ok(Trajectory { transitions, seed })
}

fn bootstrapped_return(traj: &Trajectory, v: &[f64], gamma: f64, signal: impl Fn(&Transition) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut g = 1.0;
    for t in &traj.transitions {
        acc += g * signal(t);
        g *= gamma;
    }
    match traj.transitions.last() {
        Some(t) if !t.terminal => acc + g * v[t.next_state],
        _ => acc,
    }
}

struct SeedState {
    policy: SoftmaxPolicy,
    memory: FlashbulbMemory,
    proj: ProjectionMatrix,
    ic: IntrinsicCostConfig,
    beta: BetaState,
    pid: PidState,
    v_r: Vec<f64>,
    v_c: Vec<f64>,
    v_i: Vec<f64>,
    unsafe_prev: Vec<Vec<f64>>,
}

/// Train one seed. Module errors end the run with a failure row instead of
/// propagating, so the other seeds still report.
pub fn train_seed(cfg: &ExperimentConfig, seed: u64, record_updates: bool) -> Result<SeedRun> {
    let env = cfg.env.build(seed, cfg.gamma)?;
    let spec = env.to_cmdp();
    let mut run = SeedRun {
        seed,
        optimizer: cfg.optimizer,
        metrics: Vec::with_capacity(cfg.iterations),
        trace: Vec::with_capacity(cfg.iterations),
        updates: Vec::new(),
        failure: None,
        spec: spec.clone(),
    };
    let features: Vec<Vec<f64>> = (0..env.n_states()).map(|s| env.state_features(s)).collect();
    let fmap = Arc::new(FeatureMap::from_dense(&features)?);
    let n_feat = features[0].len();
    let m = cfg.memory.embedding_dim.min(n_feat);
    let beta0 = if cfg.optimizer.is_mice() { cfg.critic.beta0 } else { 0.0 };
    let mut st = SeedState {
        policy: SoftmaxPolicy::zeros(fmap, env.n_actions()),
        memory: FlashbulbMemory::empty(m),
        proj: make_projection(n_feat, m, derive_seed(seed, &[0x70726f6a]))?,
        ic: IntrinsicCostConfig::new(cfg.memory.xi, cfg.memory.k)?,
        beta: BetaState::new(beta0, cfg.gamma, cfg.critic.alpha),
        pid: PidState::new(cfg.pid.kp, cfg.pid.ki, cfg.pid.kd, cfg.pid.initial_lambda),
        v_r: vec![0.0; env.n_states()],
        v_c: vec![0.0; env.n_states()],
        v_i: vec![0.0; env.n_states()],
        unsafe_prev: Vec::new(),
    };
    for k in 0..cfg.iterations {
        match iterate(cfg, &env, &spec, &features, seed, k, &mut st, &mut run, record_updates) {
            Ok(()) => {}
            Err(e) => {
                run.metrics.push(failure_row(seed, k, &e));
                run.failure = Some(format!("{}: {e}", e.kind()));
                break;
            }
        }
    }
    Ok(run)
}

fn failure_row(seed: u64, k: usize, e: &MiceError) -> MetricsRow {
    MetricsRow {
        iteration: k,
        seed,
        j_r_hat: f64::NAN,
        j_c_hat: f64::NAN,
        j_r_exact: f64::NAN,
        j_c_exact: f64::NAN,
        beta: f64::NAN,
        mean_ci: f64::NAN,
        memory_size: 0,
        lambda: f64::NAN,
        nu: f64::NAN,
        kl: f64::NAN,
        violation: false,
        bias: f64::NAN,
        branch: "failed".into(),
        accepted: false,
        status: e.kind().into(),
    }
}

#[allow(clippy::too_many_arguments)]
fn iterate(
    cfg: &ExperimentConfig,
    env: &Env,
    spec: &CmdpSpec,
    features: &[Vec<f64>],
    seed: u64,
    k: usize,
    st: &mut SeedState,
    run: &mut SeedRun,
    record_updates: bool,
) -> Result<()> {
    let gamma = cfg.gamma;
    let d = spec.threshold;
    let tab = st.policy.to_tabular();
    let exact = exact_policy_eval(spec, &tab)?;

    // sample under π_k
    let mut batch: Vec<Trajectory> = (0..cfg.batch_episodes)
        .map(|e| {
            let mut rng = child_rng(seed, &[k as u64, e as u64]);
            env_rollout(env, &tab, &mut rng, derive_seed(seed, &[k as u64, e as u64]))
        })
        .collect::<Result<_>>()?;

    // memory holds the previous iteration's unsafe states
    if k > 0 {
        st.memory = rebuild_memory(
            &st.unsafe_prev,
            &st.proj,
            k - 1,
            cfg.memory.capacity,
            derive_seed(seed, &[0x6d656d]),
        )?;
    }

    // c^I annotation, raw values cached per state
    let mut raw_cache: HashMap<usize, f64> = HashMap::new();
    let mut ci_sum = 0.0;
    let mut ci_count = 0usize;
    for traj in &mut batch {
        for t in &mut traj.transitions {
            let ci = if st.memory.is_empty() {
                0.0
            } else {
                match cfg.intrinsic {
                    IntrinsicMode::Memory => {
                        let raw = match raw_cache.get(&t.state) {
                            Some(&r) => r,
                            None => {
                                let q = embed(&st.proj, &features[t.state])?;
                                let r = intrinsic_cost_raw(&st.memory, &q, &st.ic)?;
                                raw_cache.insert(t.state, r);
                                r
                            }
                        };
                        normalize_intrinsic(raw, &mut st.ic)
                    }
                    IntrinsicMode::Constant { value } => value,
                }
            };
            t.intrinsic_cost = Some(ci);
            ci_sum += ci;
            ci_count += 1;
        }
    }
    let mean_ci = if ci_count > 0 { ci_sum / ci_count as f64 } else { 0.0 };
    let ci_table = frozen_ci_table(cfg, st, features)?;

    // critic bias against the strongest available reference, using the
    // critics fitted on the previous iteration
    let estimate: f64 = spec
        .initial_dist
        .iter()
        .enumerate()
        .map(|(s, &p)| p * (st.v_c[s] + st.beta.beta * st.v_i[s]))
        .sum();
    let reference = match cfg.critic.bias_reference {
        BiasReference::Exact => exact.j_c,
        BiasReference::MonteCarlo => {
            estimate_q_star(
                spec,
                &tab,
                RolloutStart::Initial,
                cfg.critic.mc_rollouts,
                env.horizon(),
                derive_seed(seed, &[k as u64, 0x6d63]),
            )?
            .value
        }
    };
    let bias = estimate - reference;
    if cfg.optimizer.is_mice() && cfg.critic.adapt_beta {
        st.beta = beta_update(&st.beta, bias, mean_ci)?;
    }
    let beta = st.beta.beta;

    // tabular critics
    let lam = cfg.gae_lambda;
    st.v_r = fit_tabular_values(&st.v_r, &batch, gamma, lam, |t| Ok(t.reward))?;
    st.v_c = fit_tabular_values(&st.v_c, &batch, gamma, lam, |t| Ok(t.extrinsic_cost))?;
    st.v_i = fit_tabular_values(&st.v_i, &batch, gamma, lam, |t| Ok(t.intrinsic_or_zero()))?;

    // the cost baseline is the extrinsic-intrinsic critic V_C + βV_I
    let v_ei: Vec<f64> = st.v_c.iter().zip(&st.v_i).map(|(c, i)| c + beta * i).collect();
    let advs = batch
        .iter()
        .map(|tr| gae_advantages(tr, &v_ei, &st.v_r, beta, gamma, lam))
        .collect::<Result<Vec<_>>>()?;
    let n_ep = batch.len() as f64;
    let j_c_hat = batch
        .iter()
        .map(|tr| bootstrapped_return(tr, &st.v_c, gamma, |t| t.extrinsic_cost))
        .sum::<f64>()
        / n_ep;
    let j_r_hat = batch
        .iter()
        .map(|tr| bootstrapped_return(tr, &st.v_r, gamma, |t| t.reward))
        .sum::<f64>()
        / n_ep;
    let j_i_hat = batch
        .iter()
        .map(|tr| bootstrapped_return(tr, &st.v_i, gamma, |t| t.intrinsic_or_zero()))
        .sum::<f64>()
        / n_ep;
    let mut sb = SurrogateBatch::from_rollouts(&st.policy, &batch, &advs, j_c_hat + beta * j_i_hat, gamma)?;
    center(&mut sb.adv_r);
    center(&mut sb.adv_c_ei);
    let bundle = surrogate_gradients(&st.policy, &sb, d)?;

    let (new_theta, branch, accepted, kl, lambda, nu, q, u, v) = if cfg.optimizer.uses_trust_region() {
        let tr = &cfg.trust_region;
        let ctx = FisherContext::new(&st.policy, &sb)?;
        let fvp = |x: &[f64]| fisher_vector_product(&ctx, x, tr.damping);
        let (step, branch, lambda, nu, q, u, v) = match cpo_dual_solve(&bundle, fvp, tr) {
            Ok(sol) => (sol.step, sol.branch, sol.lambda_star, sol.nu_star, sol.q, sol.u, sol.v),
            Err(MiceError::Infeasible { v, .. }) => {
                let step = match recovery_step(&bundle, fvp, tr) {
                    Ok(s) => s,
                    Err(MiceError::NoDescentDirection { .. }) => vec![0.0; st.policy.dim()],
                    Err(e) => return Err(e),
                };
                (step, Branch::Recovery, 0.0, 0.0, f64::NAN, f64::NAN, v)
            }
            Err(e) => return Err(e),
        };
        let rep = line_search_apply(&st.policy, &step, &sb, tr, &bundle, d, branch);
        (rep.theta, branch, rep.accepted, rep.kl, lambda, nu, q, u, v)
    } else {
        st.pid = pid_lambda_update(&st.pid, bundle.c_surplus + d, d);
        let lam_pid = st.pid.lambda;
        let theta = match cfg.pid.clip_ratio {
            None if cfg.pid.epochs <= 1 => pid_step(&st.policy, &bundle, lam_pid, cfg.pid.actor_lr)?.theta,
            clip => {
                let clip = clip.unwrap_or(f64::INFINITY);
                let mut theta = st.policy.theta.clone();
                for _ in 0..cfg.pid.epochs.max(1) {
                    let g = clipped_lagrangian_gradient(&theta, &st.policy, &sb, lam_pid, clip);
                    theta.iter_mut().zip(&g).for_each(|(t, g)| *t += cfg.pid.actor_lr * g);
                }
                theta
            }
        };
        let kl = batch_kl(&theta, &st.policy, &sb.state_weights(st.policy.n_states()));
        (theta, Branch::Unconstrained, true, kl, lam_pid, 0.0, f64::NAN, f64::NAN, f64::NAN)
    };
    let branch_label = if cfg.optimizer.uses_trust_region() { branch.label() } else { "pid" };

    run.metrics.push(MetricsRow {
        iteration: k,
        seed,
        j_r_hat,
        j_c_hat,
        j_r_exact: exact.j_r,
        j_c_exact: exact.j_c,
        beta,
        mean_ci,
        memory_size: st.memory.len(),
        lambda,
        nu,
        kl,
        violation: exact.j_c > d,
        bias,
        branch: branch_label.into(),
        accepted,
        status: "ok".into(),
    });
    run.trace.push(TraceRow {
        iteration: k,
        branch: branch_label.into(),
        lambda_star: lambda,
        nu_star: nu,
        q,
        u,
        v,
        kl,
        c_surplus: bundle.c_surplus,
    });

    let next = st.policy.with_theta(new_theta)?;
    if record_updates {
        run.updates.push(UpdateRecord {
            iteration: k,
            before: tab,
            after: next.to_tabular(),
            beta,
            ci_table,
            branch,
            accepted,
            phi: cfg.trust_region.phi,
        });
    }
    st.policy = next;
    st.unsafe_prev = batch
        .iter()
        .flat_map(|tr| tr.transitions.iter())
        .filter(|t| t.extrinsic_cost > 0.0)
        .map(|t| features[t.state].clone())
        .collect();
    Ok(())
}

/// Subtract the batch mean; on-policy advantages average to zero in
/// expectation, and their sample mean is pure noise once scaled by 1/(1−γ).
fn center(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

/// c^I per state under the current memory and normalizer scale.
fn frozen_ci_table(cfg: &ExperimentConfig, st: &SeedState, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    if st.memory.is_empty() {
        return Ok(vec![0.0; features.len()]);
    }
    match cfg.intrinsic {
        IntrinsicMode::Constant { value } => Ok(vec![value; features.len()]),
        IntrinsicMode::Memory => {
            let scale = st.ic.scale();
            features
                .iter()
                .map(|f| {
                    let raw = intrinsic_cost_raw(&st.memory, &embed(&st.proj, f)?, &st.ic)?;
                    Ok(if raw == 0.0 { 0.0 } else { raw / scale })
                })
                .collect()
        }
    }
}
