//! Exact checks of the constraint-difference identity and the two
//! constraint bounds on tabular CMDPs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, VerifyConfig};
use super::train::{train_seed, UpdateRecord};
use crate::cmdp::exact::{advantage_table, q_from_v};
use crate::cmdp::{exact_eval_with_cost, exact_policy_eval, visitation, CmdpSpec, TabularPolicy};
use crate::envs::{ChainConfig, ChainVelocityWorld, GridConfig, GridHazardWorld, TabularEnv};
use crate::error::{MiceError, Result};
use crate::memory::{embed, intrinsic_cost_raw, make_projection, rebuild_memory, IntrinsicCostConfig};
use crate::policy::{kl_tv_rows, Branch};
use crate::rng::{child_rng, derive_seed, Rng64};

/// Tolerance below which a negative slack still counts as holding.
pub const SLACK_TOL: f64 = 1e-8;
pub const LEMMA1_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub case: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl BoundReport {
    /// Inequality lhs ≤ rhs; holds ⇔ slack ≥ −1e-8.
    pub fn bound(name: &str, case: String, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        BoundReport {
            name: name.into(),
            case,
            lhs,
            rhs,
            slack,
            holds: slack >= -SLACK_TOL,
        }
    }

    /// Equality lhs = rhs up to `tol`.
    pub fn equality(name: &str, case: String, lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = rhs - lhs;
        BoundReport {
            name: name.into(),
            case,
            lhs,
            rhs,
            slack,
            holds: slack.abs() <= tol,
        }
    }
}

/// Baseline inside A^EI = c^E + βc^I + γV(s') − V(s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageBaseline {
    /// V_C^π + βV_I^π: the advantage averages to zero under π itself.
    ExtrinsicIntrinsic,
    /// V_C^π only.
    Extrinsic,
}

/// c^E(s,a) + β c^I(s).
pub fn ei_cost_table(spec: &CmdpSpec, ci: &[f64], beta: f64) -> Vec<Vec<f64>> {
    spec.extrinsic_cost
        .iter()
        .zip(ci)
        .map(|(row, &c)| row.iter().map(|x| x + beta * c).collect())
        .collect()
}

fn check_ci(spec: &CmdpSpec, ci: &[f64]) -> Result<()> {
    if ci.len() != spec.n_states {
        return Err(MiceError::Dimension {
            what: "intrinsic cost table",
            expected: spec.n_states,
            got: ci.len(),
        });
    }
    if let Some((s, _)) = ci.iter().enumerate().find(|(_, &c)| !(c >= 0.0)) {
        return Err(MiceError::MissingIntrinsicCost { state: s, action: 0 });
    }
    Ok(())
}

/// Exact A^EI(s, a | π) under the chosen baseline.
pub fn ei_advantage(
    spec: &CmdpSpec,
    policy: &TabularPolicy,
    ci: &[f64],
    beta: f64,
    baseline: AdvantageBaseline,
) -> Result<Vec<Vec<f64>>> {
    check_ci(spec, ci)?;
    let table = ei_cost_table(spec, ci, beta);
    let v = match baseline {
        AdvantageBaseline::Extrinsic => exact_policy_eval(spec, policy)?.v_c,
        AdvantageBaseline::ExtrinsicIntrinsic => exact_eval_with_cost(spec, policy, &table)?.v_c,
    };
    Ok(advantage_table(&q_from_v(spec, &table, &v), &v))
}

fn policy_mean(policy: &TabularPolicy, table: &[Vec<f64>]) -> Vec<f64> {
    table
        .iter()
        .enumerate()
        .map(|(s, row)| row.iter().zip(policy.probs(s)).map(|(x, p)| x * p).sum())
        .collect()
}

/// J^EI(π′) − J_C(π) against (1/(1−γ)) E_{s∼d^{π′}, a∼π′}[A^EI(s,a|π)],
/// the advantage using the extrinsic baseline V_C^π.
pub fn verify_lemma1(
    spec: &CmdpSpec,
    pi: &TabularPolicy,
    pi_prime: &TabularPolicy,
    ci: &[f64],
    beta: f64,
    case: String,
) -> Result<BoundReport> {
    let table = ei_cost_table(spec, ci, beta);
    let lhs = exact_eval_with_cost(spec, pi_prime, &table)?.j_c - exact_policy_eval(spec, pi)?.j_c;
    let adv = ei_advantage(spec, pi, ci, beta, AdvantageBaseline::Extrinsic)?;
    let d_prime = visitation(spec, pi_prime)?;
    let inner = policy_mean(pi_prime, &adv);
    let rhs = d_prime.iter().zip(&inner).map(|(d, x)| d * x).sum::<f64>() / (1.0 - spec.discount);
    Ok(BoundReport::equality("lemma1", case, lhs, rhs, LEMMA1_TOL))
}

/// J^EI(π′) − J^EI(π) ≤ (1/(1−γ)) E_{s∼d^π}[E_{a∼π′}A^EI + 2γε/(1−γ)·TV(s)].
pub fn verify_theorem1(
    spec: &CmdpSpec,
    pi: &TabularPolicy,
    pi_prime: &TabularPolicy,
    ci: &[f64],
    beta: f64,
    baseline: AdvantageBaseline,
    case: String,
) -> Result<BoundReport> {
    let g = spec.discount;
    let table = ei_cost_table(spec, ci, beta);
    let lhs = exact_eval_with_cost(spec, pi_prime, &table)?.j_c - exact_eval_with_cost(spec, pi, &table)?.j_c;
    let adv = ei_advantage(spec, pi, ci, beta, baseline)?;
    let inner = policy_mean(pi_prime, &adv);
    let eps = inner.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let d_pi = visitation(spec, pi)?;
    let rhs = (0..spec.n_states)
        .map(|s| {
            let tv = kl_tv_rows(pi_prime.probs(s), pi.probs(s)).1;
            d_pi[s] * (inner[s] + 2.0 * g * eps / (1.0 - g) * tv)
        })
        .sum::<f64>()
        / (1.0 - g);
    Ok(BoundReport::bound("theorem1", case, lhs, rhs))
}

/// Exact re-check of one training update k → k+1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Check {
    pub iteration: usize,
    pub report: BoundReport,
    pub epsilon_c: f64,
    /// I as stated: β·E_{τ∼π_{k+1}}[Σγᵗ c^I_t].
    pub intrinsic_stated: f64,
    /// I as it arises in the derivation: β/(1−γ)·E_{s∼d^{π_k}}[c^I(s)].
    pub intrinsic_derivation: f64,
    /// Bound with the derivation's I.
    pub rhs_derivation: f64,
    /// E_{s∼d^{π_k}} KL(π_{k+1}‖π_k).
    pub expected_kl: f64,
    /// J_C(π_k) + (1/(1−γ)) E_{d^{π_k}, π_{k+1}}[A^EI(·|π_k)].
    pub exact_surrogate: f64,
    /// Both premises hold under exact expectations.
    pub premise_exact: bool,
}

pub fn verify_theorem2(spec: &CmdpSpec, rec: &UpdateRecord) -> Result<Theorem2Check> {
    check_ci(spec, &rec.ci_table)?;
    let g = spec.discount;
    let d = spec.threshold;
    let before = exact_policy_eval(spec, &rec.before)?;
    let j_next = exact_policy_eval(spec, &rec.after)?.j_c;
    let a_c = advantage_table(&before.q_c, &before.v_c);
    let eps = policy_mean(&rec.after, &a_c)
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    let ci_cost: Vec<Vec<f64>> = rec
        .ci_table
        .iter()
        .map(|&c| vec![c; spec.n_actions])
        .collect();
    let i_stated = rec.beta * exact_eval_with_cost(spec, &rec.after, &ci_cost)?.j_c;
    let i_deriv = rec.beta
        * before
            .d_pi
            .iter()
            .zip(&rec.ci_table)
            .map(|(w, c)| w * c)
            .sum::<f64>()
        / (1.0 - g);
    let slack_term = (2.0 * rec.phi).sqrt() * g * eps / ((1.0 - g) * (1.0 - g));
    let rhs = d - i_stated + slack_term;

    let adv_ei = ei_advantage(spec, &rec.before, &rec.ci_table, rec.beta, AdvantageBaseline::Extrinsic)?;
    let inner = policy_mean(&rec.after, &adv_ei);
    let surrogate = before.j_c + before.d_pi.iter().zip(&inner).map(|(w, x)| w * x).sum::<f64>() / (1.0 - g);
    let expected_kl: f64 = (0..spec.n_states)
        .map(|s| before.d_pi[s] * kl_tv_rows(rec.after.probs(s), rec.before.probs(s)).0)
        .sum();
    Ok(Theorem2Check {
        iteration: rec.iteration,
        report: BoundReport::bound("theorem2", format!("iteration={}", rec.iteration), j_next, rhs),
        epsilon_c: eps,
        intrinsic_stated: i_stated,
        intrinsic_derivation: i_deriv,
        rhs_derivation: d - i_deriv + slack_term,
        expected_kl,
        exact_surrogate: surrogate,
        premise_exact: expected_kl <= rec.phi && surrogate <= d,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Summary {
    pub checks: Vec<Theorem2Check>,
    pub skipped_recovery: usize,
    pub skipped_rejected: usize,
}

impl Theorem2Summary {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.report.holds)
    }
}

/// Train one seed with update recording and check every accepted
/// feasible-branch update. Recovery and rejected steps are counted only.
pub fn verify_theorem2_run(cfg: &ExperimentConfig, seed: u64) -> Result<Theorem2Summary> {
    let run = train_seed(cfg, seed, true)?;
    if let Some(f) = &run.failure {
        return Err(MiceError::InvalidArgument(format!("training failed: {f}")));
    }
    let mut out = Theorem2Summary {
        checks: Vec::new(),
        skipped_recovery: 0,
        skipped_rejected: 0,
    };
    for rec in &run.updates {
        if rec.branch == Branch::Recovery {
            out.skipped_recovery += 1;
        } else if !rec.accepted {
            out.skipped_rejected += 1;
        } else {
            out.checks.push(verify_theorem2(&run.spec, rec)?);
        }
    }
    Ok(out)
}

pub const TWO_STATE_JSON: &str = include_str!("../../fixtures/two_state.json");
pub const FIVE_STATE_JSON: &str = include_str!("../../fixtures/five_state.json");

/// Built-in fixtures: two hand-written CMDPs plus small grid and chain models.
pub fn builtin_fixtures() -> Result<Vec<(String, CmdpSpec)>> {
    let grid = GridHazardWorld::generate(
        &GridConfig {
            width: 4,
            height: 4,
            n_hazards: 3,
            ..GridConfig::default()
        },
        7,
        0.95,
    )?;
    let chain = ChainVelocityWorld::new(
        ChainConfig {
            n_positions: 6,
            n_velocities: 3,
            ..ChainConfig::default()
        },
        0.95,
    )?;
    Ok(vec![
        ("two_state".into(), CmdpSpec::from_json_str(TWO_STATE_JSON)?),
        ("five_state".into(), CmdpSpec::from_json_str(FIVE_STATE_JSON)?),
        ("grid4x4".into(), grid.to_cmdp()),
        ("chain6".into(), chain.to_cmdp()),
    ])
}

pub fn fixtures_for(cfg: &VerifyConfig) -> Result<Vec<(String, CmdpSpec)>> {
    let mut out = builtin_fixtures()?;
    for path in &cfg.fixtures {
        out.push((path.clone(), crate::cmdp::load_cmdp(path)?));
    }
    Ok(out)
}

/// Softmax policy with N(0, scale²) logits.
pub fn random_policy(rng: &mut Rng64, n_states: usize, n_actions: usize, scale: f64) -> TabularPolicy {
    let logits: Vec<Vec<f64>> = (0..n_states)
        .map(|_| {
            (0..n_actions)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    TabularPolicy::from_logits(&logits)
}

/// Perturb every logit of `base` by N(0, scale²).
pub fn perturb_policy(rng: &mut Rng64, base: &TabularPolicy, scale: f64) -> TabularPolicy {
    let logits: Vec<Vec<f64>> = base
        .table()
        .iter()
        .map(|row| {
            row.iter()
                .map(|p| p.max(1e-300).ln() + scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    TabularPolicy::from_logits(&logits)
}

/// Memory-derived frozen c^I per state: every costly state is remembered
/// once, features are one-hot, values are divided by their mean.
pub fn memory_ci_table(spec: &CmdpSpec, seed: u64) -> Result<Vec<f64>> {
    let n = spec.n_states;
    let one_hot = |s: usize| {
        let mut v = vec![0.0; n];
        v[s] = 1.0;
        v
    };
    let unsafe_states: Vec<Vec<f64>> = (0..n)
        .filter(|&s| spec.extrinsic_cost[s].iter().any(|&c| c > 0.0))
        .map(one_hot)
        .collect();
    let proj = make_projection(n, n.min(8), derive_seed(seed, &[0x6369]))?;
    let mem = rebuild_memory(&unsafe_states, &proj, 0, None, seed)?;
    let cfg = IntrinsicCostConfig::new(1e-1, 3)?;
    let raw: Vec<f64> = (0..n)
        .map(|s| intrinsic_cost_raw(&mem, &embed(&proj, &one_hot(s))?, &cfg))
        .collect::<Result<_>>()?;
    let mean = raw.iter().sum::<f64>() / n as f64;
    Ok(raw.iter().map(|r| if mean > 0.0 { r / mean } else { 0.0 }).collect())
}

/// Constraint identity over all fixtures: the π′ = π case and `pairs` random pairs,
/// each with β = 0 and β = cfg.beta.
pub fn lemma1_suite(cfg: &VerifyConfig) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    for (fi, (name, spec)) in fixtures_for(cfg)?.iter().enumerate() {
        let ci = memory_ci_table(spec, derive_seed(cfg.seed, &[fi as u64]))?;
        let mut rng = child_rng(cfg.seed, &[0x6c31, fi as u64]);
        let pi = random_policy(&mut rng, spec.n_states, spec.n_actions, 1.0);
        out.push(verify_lemma1(spec, &pi, &pi, &ci, 0.0, format!("{name}/same/beta=0"))?);
        for i in 0..cfg.pairs_lemma1 {
            let pi = random_policy(&mut rng, spec.n_states, spec.n_actions, 1.0);
            let pp = random_policy(&mut rng, spec.n_states, spec.n_actions, 1.0);
            for beta in [0.0, cfg.beta] {
                out.push(verify_lemma1(spec, &pi, &pp, &ci, beta, format!("{name}/pair{i}/beta={beta}"))?);
            }
        }
    }
    Ok(out)
}

/// Surrogate cost bound over all fixtures: π′ = π, a near-identical pair, and `pairs`
/// random pairs, under the extrinsic-intrinsic baseline.
pub fn theorem1_suite(cfg: &VerifyConfig, baseline: AdvantageBaseline) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    for (fi, (name, spec)) in fixtures_for(cfg)?.iter().enumerate() {
        let ci = memory_ci_table(spec, derive_seed(cfg.seed, &[fi as u64]))?;
        let mut rng = child_rng(cfg.seed, &[0x7431, fi as u64]);
        let pi = random_policy(&mut rng, spec.n_states, spec.n_actions, 1.0);
        out.push(verify_theorem1(spec, &pi, &pi, &ci, cfg.beta, baseline, format!("{name}/same"))?);
        let near = perturb_policy(&mut rng, &pi, 1e-3);
        out.push(verify_theorem1(spec, &pi, &near, &ci, cfg.beta, baseline, format!("{name}/near"))?);
        for i in 0..cfg.pairs_theorem1 {
            let pi = random_policy(&mut rng, spec.n_states, spec.n_actions, 1.0);
            let pp = random_policy(&mut rng, spec.n_states, spec.n_actions, 1.0);
            out.push(verify_theorem1(spec, &pi, &pp, &ci, cfg.beta, baseline, format!("{name}/pair{i}"))?);
        }
    }
    Ok(out)
}

/// Recorded-target replay of the estimation-bias recursion for one (s, a):
/// after `warmup` random updates of the whole table, the tracked pair is
/// updated `m_max` more times (interleaved with random updates elsewhere),
/// and for every m ≤ m_max the closed form
/// (1−α)^m (Q* − Q_n) − α Σ_{i=1..m} (1−α)^{i−1} t_{n+m−i}
/// is compared with the actual Q* − Q_{n+m}. Returns the largest error.
pub fn verify_bias_recursion(
    spec: &CmdpSpec,
    ci: &[f64],
    beta: f64,
    alpha: f64,
    warmup: usize,
    m_max: usize,
    seed: u64,
) -> Result<f64> {
    use crate::cmdp::optimal_min_cost_q;
    use crate::cmdp::sample::step_spec;
    use crate::critic::ei_q::ei_target;
    use crate::critic::{EiQTable, NextValue, StepSchedule};

    check_ci(spec, ci)?;
    let q_star = optimal_min_cost_q(spec, 1e-12)?;
    let mut rng = child_rng(seed, &[0x6232]);
    let init: Vec<Vec<f64>> = (0..spec.n_states)
        .map(|_| (0..spec.n_actions).map(|_| 5.0 * rng.random::<f64>()).collect())
        .collect();
    let mut table = EiQTable::from_table(init, StepSchedule::Constant { alpha })?;
    let (s0, a0) = (rng.random_range(0..spec.n_states), rng.random_range(0..spec.n_actions));
    let update = |table: &mut EiQTable, rng: &mut Rng64, s: usize, a: usize| -> Result<f64> {
        let mut t = step_spec(spec, s, a, rng);
        t.intrinsic_cost = Some(ci[s]);
        let target = ei_target(table, &t, beta, spec.discount, NextValue::Min)?;
        table.apply_target(s, a, target);
        Ok(target)
    };
    for _ in 0..warmup {
        let (s, a) = (rng.random_range(0..spec.n_states), rng.random_range(0..spec.n_actions));
        update(&mut table, &mut rng, s, a)?;
    }
    let qs = q_star[s0][a0];
    let gap_n = qs - table.q[s0][a0];
    let mut t_rec: Vec<f64> = Vec::with_capacity(m_max);
    let mut worst = 0.0_f64;
    for m in 1..=m_max {
        for _ in 0..rng.random_range(0..4usize) {
            let (s, a) = (rng.random_range(0..spec.n_states), rng.random_range(0..spec.n_actions));
            if (s, a) != (s0, a0) {
                update(&mut table, &mut rng, s, a)?;
            }
        }
        let target = update(&mut table, &mut rng, s0, a0)?;
        t_rec.push(target - qs);
        // t_rec[j] is t_{n+j}; the sum runs over t_{n+m−i}, i = 1..m
        let sum: f64 = (1..=m)
            .map(|i| (1.0 - alpha).powi(i as i32 - 1) * t_rec[m - i])
            .sum();
        let predicted = (1.0 - alpha).powi(m as i32) * gap_n - alpha * sum;
        worst = worst.max((predicted - (qs - table.q[s0][a0])).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_load() {
        let f = builtin_fixtures().unwrap();
        assert_eq!(f.len(), 4);
    }

    #[test]
    fn lemma1_same_policy_zero_beta() {
        let spec = CmdpSpec::from_json_str(TWO_STATE_JSON).unwrap();
        let pi = TabularPolicy::uniform(2, 2);
        let r = verify_lemma1(&spec, &pi, &pi, &[0.3, 1.0], 0.0, "x".into()).unwrap();
        assert!(r.lhs.abs() < 1e-12 && r.rhs.abs() < 1e-12);
    }

    #[test]
    fn theorem1_same_policy_zero_slack() {
        let spec = CmdpSpec::from_json_str(FIVE_STATE_JSON).unwrap();
        let pi = TabularPolicy::uniform(5, 2);
        let ci = memory_ci_table(&spec, 1).unwrap();
        let r = verify_theorem1(&spec, &pi, &pi, &ci, 0.5, AdvantageBaseline::ExtrinsicIntrinsic, "x".into()).unwrap();
        assert!(r.lhs.abs() < 1e-12 && r.rhs.abs() < 1e-10 && r.holds);
    }
}
