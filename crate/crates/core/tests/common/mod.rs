#![allow(dead_code)]

use mice_core::cmdp::{CmdpSpec, TabularPolicy};
use mice_core::rng::rng_from_seed;
use rand::Rng;

fn random_simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

/// Dense random CMDP with non-negative costs.
pub fn random_cmdp(seed: u64, n: usize, na: usize, gamma: f64) -> CmdpSpec {
    let mut rng = rng_from_seed(seed);
    let p = (0..n)
        .map(|_| (0..na).map(|_| random_simplex(&mut rng, n)).collect())
        .collect();
    let r = (0..n).map(|_| (0..na).map(|_| rng.random::<f64>()).collect()).collect();
    let c = (0..n).map(|_| (0..na).map(|_| 2.0 * rng.random::<f64>()).collect()).collect();
    let rho = random_simplex(&mut rng, n);
    CmdpSpec::new(n, na, p, r, c, rho, gamma, 1.0).unwrap()
}

pub fn random_tabular(seed: u64, n: usize, na: usize) -> TabularPolicy {
    let mut rng = rng_from_seed(seed ^ 0xabcdef);
    TabularPolicy::new((0..n).map(|_| random_simplex(&mut rng, na)).collect()).unwrap()
}

/// Iterative policy evaluation of a per-(s,a) table, independent of any
/// linear solver.
pub fn iterate_values(spec: &CmdpSpec, pi: &TabularPolicy, table: &[Vec<f64>], sweeps: usize) -> Vec<f64> {
    let n = spec.n_states;
    let mut v = vec![0.0; n];
    for _ in 0..sweeps {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                (0..spec.n_actions)
                    .map(|a| {
                        let ev: f64 = spec.transition[s][a].iter().zip(&v).map(|(p, x)| p * x).sum();
                        pi.probs(s)[a] * (table[s][a] + spec.discount * ev)
                    })
                    .sum()
            })
            .collect();
        v = next;
    }
    v
}
