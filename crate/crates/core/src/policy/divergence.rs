use crate::cmdp::TabularPolicy;
use crate::error::{MiceError, Result};

/// KL(p‖q) and TV(p, q) for a pair of action distributions.
pub fn kl_tv_rows(p: &[f64], q: &[f64]) -> (f64, f64) {
    let mut kl = 0.0;
    let mut tv = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            kl += if b > 0.0 { a * (a / b).ln() } else { f64::INFINITY };
        }
        tv += (a - b).abs();
    }
    (kl.max(0.0), 0.5 * tv)
}

/// State-weighted KL(π_a‖π_b) and TV(π_a, π_b).
pub fn kl_and_tv(a: &TabularPolicy, b: &TabularPolicy, state_weights: &[f64]) -> Result<(f64, f64)> {
    if a.n_states() != b.n_states() || state_weights.len() != a.n_states() {
        return Err(MiceError::Dimension {
            what: "state weights",
            expected: a.n_states(),
            got: state_weights.len(),
        });
    }
    let total: f64 = state_weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 || state_weights.iter().any(|&w| w < 0.0) {
        return Err(MiceError::InvalidDistribution {
            what: "state weights".into(),
            sum: total,
        });
    }
    let mut kl = 0.0;
    let mut tv = 0.0;
    for (s, &w) in state_weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (k, t) = kl_tv_rows(a.probs(s), b.probs(s));
        kl += w * k;
        tv += w * t;
    }
    Ok((kl, tv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_disjoint() {
        let a = TabularPolicy::new(vec![vec![1.0, 0.0]]).unwrap();
        let b = TabularPolicy::new(vec![vec![0.0, 1.0]]).unwrap();
        assert_eq!(kl_and_tv(&a, &a, &[1.0]).unwrap(), (0.0, 0.0));
        assert_eq!(kl_and_tv(&a, &b, &[1.0]).unwrap().1, 1.0);
    }
}
