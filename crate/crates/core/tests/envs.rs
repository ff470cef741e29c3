use mice_core::cmdp::{sample_trajectory, TabularPolicy};
use mice_core::envs::{ChainConfig, EnvConfig, FeatureMode, GridConfig, TabularEnv};
use mice_core::rng::rng_from_seed;

/// Each sampled next-state frequency lies within 3 binomial standard errors
/// of the tabular row (plus a tiny slack for exact-zero rows).
fn frequencies_match(env: &impl TabularEnv, pairs: &[(usize, usize)], draws: usize, seed: u64) {
    let spec = env.to_cmdp();
    let mut rng = rng_from_seed(seed);
    for &(s, a) in pairs {
        let mut counts = vec![0usize; spec.n_states];
        for _ in 0..draws {
            let t = env.step(s, a, &mut rng).unwrap();
            assert_eq!(t.reward, spec.reward[s][a]);
            assert_eq!(t.extrinsic_cost, spec.extrinsic_cost[s][a]);
            counts[t.next_state] += 1;
        }
        for (sp, &c) in counts.iter().enumerate() {
            let p = spec.transition[s][a][sp];
            let freq = c as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * se + 1e-12, "({s},{a})→{sp}: freq {freq} vs p {p}");
        }
    }
}

fn grid5() -> impl TabularEnv {
    let cfg = GridConfig {
        width: 5,
        height: 5,
        n_hazards: 4,
        slip_prob: 0.2,
        ..GridConfig::default()
    };
    EnvConfig::Grid(cfg).build(3, 0.99).unwrap()
}

#[test]
fn grid_sampling_matches_tabular_model() {
    let env = grid5();
    frequencies_match(&env, &[(0, 0), (6, 1), (12, 2), (18, 3), (4, 1)], 100_000, 1);
}

#[test]
fn chain_sampling_matches_tabular_model() {
    let env = EnvConfig::Chain(ChainConfig::default()).build(0, 0.95).unwrap();
    frequencies_match(&env, &[(0, 2), (5, 1), (9, 0), (14, 2)], 100_000, 2);
}

#[test]
fn two_state_chain_binomial() {
    // uniform policy on the two-state fixture: count 0→1 transitions
    let spec = mice_core::cmdp::load_cmdp(format!("{}/fixtures/two_state.json", env!("CARGO_MANIFEST_DIR"))).unwrap();
    let pi = TabularPolicy::uniform(2, 2);
    let traj = sample_trajectory(&spec, &pi, 100_000, 7).unwrap();
    let mut from = [[0usize; 2]; 2];
    for t in &traj.transitions {
        from[t.state][t.next_state] += 1;
    }
    for s in 0..2 {
        let n = (from[s][0] + from[s][1]) as f64;
        let p: f64 = (0..2).map(|a| 0.5 * spec.transition[s][a][1]).sum();
        let se = (p * (1.0 - p) / n).sqrt();
        assert!((from[s][1] as f64 / n - p).abs() <= 3.0 * se + 1e-12);
    }
    assert_eq!(traj, sample_trajectory(&spec, &pi, 100_000, 7).unwrap());
}

#[test]
fn features_are_injective() {
    for mode in [FeatureMode::OneHot, FeatureMode::Coordinate] {
        let env = EnvConfig::Grid(GridConfig {
            width: 5,
            height: 4,
            n_hazards: 3,
            features: mode,
            ..GridConfig::default()
        })
        .build(1, 0.9)
        .unwrap();
        let feats: Vec<Vec<f64>> = (0..env.n_states()).map(|s| env.state_features(s)).collect();
        let dim = feats[0].len();
        for i in 0..feats.len() {
            assert_eq!(feats[i].len(), dim);
            for j in i + 1..feats.len() {
                assert_ne!(feats[i], feats[j]);
            }
        }
    }
}

#[test]
fn specs_validate() {
    let grid = grid5();
    grid.to_cmdp().validate().unwrap();
    let chain = EnvConfig::Chain(ChainConfig::default()).build(0, 0.95).unwrap();
    chain.to_cmdp().validate().unwrap();
}
