//! Exact linear-algebra oracles on tabular CMDPs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::policy::TabularPolicy;
use super::spec::CmdpSpec;
use crate::error::{MiceError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactValues {
    pub v_r: Vec<f64>,
    pub v_c: Vec<f64>,
    pub q_c: Vec<Vec<f64>>,
    pub d_pi: Vec<f64>,
    pub j_r: f64,
    pub j_c: f64,
}

/// P_π[s][s'] = Σ_a π(a|s) P[s][a][s'].
pub fn policy_transition_matrix(spec: &CmdpSpec, policy: &TabularPolicy) -> DMatrix<f64> {
    let n = spec.n_states;
    let mut m = DMatrix::zeros(n, n);
    for s in 0..n {
        let pi = policy.probs(s);
        for (a, &pa) in pi.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (sp, &p) in spec.transition[s][a].iter().enumerate() {
                m[(s, sp)] += pa * p;
            }
        }
    }
    m
}

/// r_π[s] = Σ_a π(a|s) table[s][a].
pub fn policy_average(table: &[Vec<f64>], policy: &TabularPolicy) -> Vec<f64> {
    table
        .iter()
        .enumerate()
        .map(|(s, row)| row.iter().zip(policy.probs(s)).map(|(x, p)| x * p).sum())
        .collect()
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Dense LU solve with a few rounds of iterative refinement.
pub fn solve_refined(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.clone().lu();
    let mut x = lu.solve(b).ok_or(MiceError::Singular { residual: f64::INFINITY })?;
    for _ in 0..3 {
        let r = b - a * &x;
        if sup_norm(&r) == 0.0 {
            break;
        }
        match lu.solve(&r) {
            Some(dx) => x += dx,
            None => break,
        }
    }
    let residual = sup_norm(&(b - a * &x));
    let scale = 1.0_f64.max(sup_norm(&x)).max(sup_norm(b));
    if !residual.is_finite() || residual > 1e-9 * scale {
        return Err(MiceError::Singular { residual });
    }
    Ok(x)
}

/// Solve (I − γP_π)V = Σ_a π c and return (V, Q) for an arbitrary [s][a] table.
pub fn evaluate_table(
    spec: &CmdpSpec,
    policy: &TabularPolicy,
    table: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    spec.check_table_shape(table, "value table")?;
    policy.check_shape(spec.n_states, spec.n_actions)?;
    let n = spec.n_states;
    let g = spec.discount;
    let p = policy_transition_matrix(spec, policy);
    let a = DMatrix::identity(n, n) - p * g;
    let b = DVector::from_vec(policy_average(table, policy));
    let v = solve_refined(&a, &b)?.data.as_vec().clone();
    let q = q_from_v(spec, table, &v);
    Ok((v, q))
}

/// Q[s][a] = table[s][a] + γ Σ_s' P[s][a][s'] V[s'].
pub fn q_from_v(spec: &CmdpSpec, table: &[Vec<f64>], v: &[f64]) -> Vec<Vec<f64>> {
    let g = spec.discount;
    (0..spec.n_states)
        .map(|s| {
            (0..spec.n_actions)
                .map(|a| {
                    let ev: f64 = spec.transition[s][a]
                        .iter()
                        .zip(v)
                        .map(|(p, x)| p * x)
                        .sum();
                    table[s][a] + g * ev
                })
                .collect()
        })
        .collect()
}

/// d^π = (1−γ)(I − γP_πᵀ)⁻¹ρ.
pub fn visitation(spec: &CmdpSpec, policy: &TabularPolicy) -> Result<Vec<f64>> {
    policy.check_shape(spec.n_states, spec.n_actions)?;
    let n = spec.n_states;
    let g = spec.discount;
    let pt = policy_transition_matrix(spec, policy).transpose();
    let a = DMatrix::identity(n, n) - pt * g;
    let rho = DVector::from_column_slice(&spec.initial_dist);
    let d = solve_refined(&a, &rho)? * (1.0 - g);
    Ok(d.data.as_vec().clone())
}

/// Truncated series (1−γ) Σ_{t<terms} γ^t (P_πᵀ)^t ρ.
pub fn visitation_power_series(spec: &CmdpSpec, policy: &TabularPolicy, terms: usize) -> Vec<f64> {
    let g = spec.discount;
    let pt = policy_transition_matrix(spec, policy).transpose();
    let mut p_t = DVector::from_column_slice(&spec.initial_dist);
    let mut acc = DVector::zeros(spec.n_states);
    let mut w = 1.0 - g;
    for _ in 0..terms {
        acc += &p_t * w;
        p_t = &pt * p_t;
        w *= g;
    }
    acc.data.as_vec().clone()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn exact_policy_eval(spec: &CmdpSpec, policy: &TabularPolicy) -> Result<ExactValues> {
    exact_eval_with_cost(spec, policy, &spec.extrinsic_cost)
}

/// Exact evaluation with the cost table replaced by `cost_table`
/// (reward side unchanged).
pub fn exact_eval_with_cost(
    spec: &CmdpSpec,
    policy: &TabularPolicy,
    cost_table: &[Vec<f64>],
) -> Result<ExactValues> {
    spec.check_table_shape(cost_table, "cost table")?;
    let (v_r, _) = evaluate_table(spec, policy, &spec.reward)?;
    let (v_c, q_c) = evaluate_table(spec, policy, cost_table)?;
    let d_pi = visitation(spec, policy)?;
    let j_r = dot(&spec.initial_dist, &v_r);
    let j_c = dot(&spec.initial_dist, &v_c);
    Ok(ExactValues {
        v_r,
        v_c,
        q_c,
        d_pi,
        j_r,
        j_c,
    })
}

/// sup_s |table_π(s) + γ(P_π V)(s) − V(s)|.
pub fn bellman_residual(
    spec: &CmdpSpec,
    policy: &TabularPolicy,
    table: &[Vec<f64>],
    v: &[f64],
) -> f64 {
    let q = q_from_v(spec, table, v);
    (0..spec.n_states)
        .map(|s| (dot(policy.probs(s), &q[s]) - v[s]).abs())
        .fold(0.0, f64::max)
}

/// One application of the min-cost Bellman operator with cost `table`.
pub fn min_bellman(spec: &CmdpSpec, table: &[Vec<f64>], q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let v: Vec<f64> = q
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    q_from_v(spec, table, &v)
}

pub fn table_sup_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

/// Fixed point of the min-cost Bellman operator for the CMDP's extrinsic cost table.
pub fn optimal_min_cost_q(spec: &CmdpSpec, tol: f64) -> Result<Vec<Vec<f64>>> {
    optimal_min_q_with_cost(spec, &spec.extrinsic_cost, tol)
}

/// Value iteration until ‖TQ − Q‖_∞ ≤ tol for the returned Q.
pub fn optimal_min_q_with_cost(
    spec: &CmdpSpec,
    table: &[Vec<f64>],
    tol: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(tol > 0.0) {
        return Err(MiceError::InvalidArgument("tol must be positive".into()));
    }
    spec.check_table_shape(table, "cost table")?;
    let mut q = vec![vec![0.0; spec.n_actions]; spec.n_states];
    loop {
        let next = min_bellman(spec, table, &q);
        let res = table_sup_diff(&next, &q);
        q = next;
        // ‖T q_new − q_new‖ ≤ γ·res
        if spec.discount * res <= tol {
            let check = table_sup_diff(&min_bellman(spec, table, &q), &q);
            if check <= tol {
                return Ok(q);
            }
        }
    }
}

/// A[s][a] = Q[s][a] − V[s].
pub fn advantage_table(q: &[Vec<f64>], v: &[f64]) -> Vec<Vec<f64>> {
    q.iter()
        .zip(v)
        .map(|(row, vs)| row.iter().map(|x| x - vs).collect())
        .collect()
}

/// Element-wise `a + scale·b`.
pub fn add_scaled(a: &[Vec<f64>], b: &[Vec<f64>], scale: f64) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + scale * q).collect())
        .collect()
}
