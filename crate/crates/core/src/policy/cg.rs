use crate::error::{MiceError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve A x = b for symmetric positive definite A given as a product.
/// Stops when ‖A x − b‖ ≤ tol·‖b‖ or after `iters` iterations.
pub fn conjugate_gradient<F: Fn(&[f64]) -> Vec<f64>>(op: F, b: &[f64], iters: usize, tol: f64) -> Result<CgResult> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(CgResult {
            x,
            residual_norm: 0.0,
            iterations: 0,
        });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut k = 0;
    while k < iters && rr.sqrt() > tol * bnorm {
        let ap = op(&p);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(MiceError::Divergence("conjugate gradient curvature"));
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        k += 1;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MiceError::Divergence("conjugate gradient iterate"));
    }
    let ax = op(&x);
    let residual_norm = ax.iter().zip(b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    Ok(CgResult {
        x,
        residual_norm,
        iterations: k,
    })
}
