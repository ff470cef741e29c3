mod common;

use common::{iterate_values, random_cmdp, random_tabular};
use mice_core::cmdp::exact::{min_bellman, table_sup_diff, visitation_power_series};
use mice_core::cmdp::{
    discounted_cost_return, exact_eval_with_cost, exact_policy_eval, load_cmdp, optimal_min_cost_q,
    sample_trajectory, visitation, CmdpSpec, TabularPolicy,
};
use proptest::prelude::*;

fn fixture(name: &str) -> CmdpSpec {
    load_cmdp(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn values_match_fixed_point_iteration() {
    for (seed, n, na) in [(1, 3, 2), (2, 6, 3), (3, 10, 4)] {
        let spec = random_cmdp(seed, n, na, 0.9);
        let pi = random_tabular(seed, n, na);
        let ex = exact_policy_eval(&spec, &pi).unwrap();
        let vc = iterate_values(&spec, &pi, &spec.extrinsic_cost, 600);
        let vr = iterate_values(&spec, &pi, &spec.reward, 600);
        for s in 0..n {
            assert!((ex.v_c[s] - vc[s]).abs() < 1e-10, "v_c[{s}]");
            assert!((ex.v_r[s] - vr[s]).abs() < 1e-10, "v_r[{s}]");
        }
    }
}

#[test]
fn visitation_matches_power_series() {
    let spec = random_cmdp(9, 7, 3, 0.95);
    let pi = random_tabular(9, 7, 3);
    let lu = visitation(&spec, &pi).unwrap();
    let ps = visitation_power_series(&spec, &pi, 2000);
    for s in 0..7 {
        assert!((lu[s] - ps[s]).abs() < 1e-8);
    }
    assert!((lu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn monte_carlo_within_four_standard_errors() {
    let spec = fixture("two_state.json");
    let pi = TabularPolicy::new(vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
    let exact = exact_policy_eval(&spec, &pi).unwrap().j_c;
    let n = 4000;
    let rets: Vec<f64> = (0..n)
        .map(|i| discounted_cost_return(&sample_trajectory(&spec, &pi, 400, i).unwrap(), spec.discount))
        .collect();
    let mean = rets.iter().sum::<f64>() / n as f64;
    let var = rets.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let se = (var / n as f64).sqrt();
    assert!((mean - exact).abs() < 4.0 * se, "mc {mean} exact {exact} se {se}");
}

#[test]
fn min_cost_q_is_bellman_fixed_point_and_dominated() {
    let spec = fixture("five_state.json");
    let q = optimal_min_cost_q(&spec, 1e-13).unwrap();
    assert!(table_sup_diff(&min_bellman(&spec, &spec.extrinsic_cost, &q), &q) < 1e-12);
    // no policy does better than Q*
    for seed in 0..20 {
        let pi = random_tabular(seed, 5, 2);
        let ex = exact_policy_eval(&spec, &pi).unwrap();
        for s in 0..5 {
            for a in 0..2 {
                assert!(ex.q_c[s][a] >= q[s][a] - 1e-9);
            }
        }
    }
}

#[test]
fn two_state_closed_form() {
    // V = (I − γP_π)⁻¹ c_π solved by hand for a deterministic policy
    let spec = fixture("two_state.json");
    let pi = TabularPolicy::deterministic(&[0, 1], 2);
    let ex = exact_policy_eval(&spec, &pi).unwrap();
    // c_π = [0, 1.5]; P_π = [[0.8, 0.2], [0.1, 0.9]]
    let (a, b, c, d) = (1.0 - 0.9 * 0.8, -0.9 * 0.2, -0.9 * 0.1, 1.0 - 0.9 * 0.9);
    let det = a * d - b * c;
    let v0 = (d * 0.0 - b * 1.5) / det;
    let v1 = (a * 1.5 - c * 0.0) / det;
    assert!((ex.v_c[0] - v0).abs() < 1e-12 && (ex.v_c[1] - v1).abs() < 1e-12);
    assert!((ex.j_c - (0.6 * v0 + 0.4 * v1)).abs() < 1e-12);
}

#[test]
fn fixtures_validate() {
    for name in ["two_state.json", "five_state.json"] {
        fixture(name).validate().unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn occupancy_identity(seed in 0u64..10_000, n in 2usize..7, na in 1usize..4, g in 0.5f64..0.97) {
        // J_C = ρᵀV_C = (1/(1−γ)) Σ_s d^π(s) Σ_a π(a|s) C(s,a)
        let spec = random_cmdp(seed, n, na, g);
        let pi = random_tabular(seed, n, na);
        let ex = exact_policy_eval(&spec, &pi).unwrap();
        let via_d: f64 = (0..n)
            .map(|s| ex.d_pi[s] * (0..na).map(|a| pi.probs(s)[a] * spec.extrinsic_cost[s][a]).sum::<f64>())
            .sum::<f64>() / (1.0 - g);
        prop_assert!((ex.j_c - via_d).abs() < 1e-9 * (1.0 + ex.j_c.abs()));
        prop_assert!(ex.d_pi.iter().all(|&x| x >= -1e-15));
    }

    #[test]
    fn cost_evaluation_is_linear(seed in 0u64..10_000, k in 0.0f64..3.0) {
        let spec = random_cmdp(seed, 4, 2, 0.9);
        let pi = random_tabular(seed, 4, 2);
        let scaled: Vec<Vec<f64>> = spec.extrinsic_cost.iter().map(|r| r.iter().map(|x| k * x).collect()).collect();
        let a = exact_eval_with_cost(&spec, &pi, &scaled).unwrap().j_c;
        let b = exact_policy_eval(&spec, &pi).unwrap().j_c;
        prop_assert!((a - k * b).abs() < 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn json_round_trip_is_exact(seed in 0u64..10_000) {
        let spec = random_cmdp(seed, 3, 2, 0.9);
        let back = CmdpSpec::from_json_str(&spec.to_json_string()).unwrap();
        prop_assert_eq!(spec, back);
    }
}
