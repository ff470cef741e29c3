//! Trust-region subproblem
//!
//!   max_x gᵀx  s.t.  c + bᵀx ≤ 0,  ½ xᵀHx ≤ φ
//!
//! solved through its two-variable dual
//!
//!   D(λ, ν) = −(q − 2νu + ν²v)/(2λ) + νc − λφ,   λ > 0, ν ≥ 0,
//!
//! with q = gᵀH⁻¹g, u = gᵀH⁻¹b, v = bᵀH⁻¹b and primal x = H⁻¹(g − νb)/λ.

use serde::{Deserialize, Serialize};

use super::batch::GradientBundle;
use super::cg::conjugate_gradient;
use crate::error::{MiceError, Result};

pub const DEFAULT_PHI: f64 = 1e-2;
pub const DEFAULT_DAMPING: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionConfig {
    pub phi: f64,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub backtrack_coef: f64,
    pub max_backtracks: usize,
    pub damping: f64,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        TrustRegionConfig {
            phi: DEFAULT_PHI,
            cg_iters: 50,
            cg_tol: 1e-10,
            backtrack_coef: 0.8,
            max_backtracks: 10,
            damping: DEFAULT_DAMPING,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// ν* = 0: the linear constraint is inactive.
    Unconstrained,
    /// ν* > 0: the step lies on the linearized constraint boundary.
    Constrained,
    Recovery,
}

impl Branch {
    pub fn label(&self) -> &'static str {
        match self {
            Branch::Unconstrained | Branch::Constrained => "feasible",
            Branch::Recovery => "recovery",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub lambda_star: f64,
    pub nu_star: f64,
    pub q: f64,
    pub u: f64,
    pub v: f64,
    pub c: f64,
    pub step: Vec<f64>,
    pub branch: Branch,
}

/// Scalar part of the dual solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualScalars {
    pub lambda: f64,
    pub nu: f64,
    /// q − u²/v treated as zero (g parallel to b in the H⁻¹ metric).
    pub degenerate: bool,
}

pub fn dual_value(lambda: f64, nu: f64, q: f64, u: f64, v: f64, c: f64, phi: f64) -> f64 {
    -(q - 2.0 * nu * u + nu * nu * v) / (2.0 * lambda) + nu * c - lambda * phi
}

pub fn nu_of_lambda(lambda: f64, u: f64, v: f64, c: f64) -> f64 {
    ((lambda * c + u) / v).max(0.0)
}

/// Infeasible iff the linearized constraint cannot be met inside the trust region.
pub fn is_infeasible(c: f64, v: f64, phi: f64) -> bool {
    c > 0.0 && c * c / (2.0 * v) > phi
}

const DEGENERATE_REL: f64 = 1e-10;
const LAMBDA_FLOOR: f64 = 1e-12;

/// Maximize λ ↦ D(λ, ν*(λ)). The function is concave; on each side of
/// λc + u = 0 it has the form −a/λ − bλ + const, so the maximum is found
/// among the projected stationary points of both pieces and the split
/// point. A log-grid scan covers numerically degenerate inputs.
pub fn solve_dual_scalars(q: f64, u: f64, v: f64, c: f64, phi: f64) -> Result<DualScalars> {
    if !(v > 0.0) || !(phi > 0.0) {
        return Err(MiceError::InvalidArgument(format!("dual needs v > 0, phi > 0 (v={v}, phi={phi})")));
    }
    if is_infeasible(c, v, phi) {
        return Err(MiceError::Infeasible { c, v });
    }
    let a_coef = q - u * u / v;
    let degenerate = a_coef <= DEGENERATE_REL * q.max(f64::MIN_POSITIVE);
    let a_coef = if degenerate { 0.0 } else { a_coef };
    let b_coef = 2.0 * phi - c * c / v;

    let value = |lam: f64| {
        let nu = nu_of_lambda(lam, u, v, c);
        if nu > 0.0 {
            // closed form on the constrained piece, exact when A = 0
            -a_coef / (2.0 * lam) - lam * b_coef / 2.0 + u * c / v
        } else {
            -q / (2.0 * lam) - lam * phi
        }
    };

    let split = if c != 0.0 { -u / c } else { f64::NAN };
    let mut cands: Vec<f64> = Vec::with_capacity(8);
    if q > 0.0 {
        cands.push((q / (2.0 * phi)).sqrt());
    }
    if a_coef > 0.0 && b_coef > 0.0 {
        cands.push((a_coef / b_coef).sqrt());
    }
    if split.is_finite() && split > 0.0 {
        cands.push(split);
    }
    let scale = cands.iter().copied().fold(1.0_f64, f64::max);
    cands.push(LAMBDA_FLOOR * scale.min(1.0));

    let mut best_l = f64::NAN;
    let mut best_v = f64::NEG_INFINITY;
    for &l in &cands {
        if !(l > 0.0) || !l.is_finite() {
            continue;
        }
        let val = value(l);
        if val > best_v {
            best_v = val;
            best_l = l;
        }
    }
    // guard against rounding in the closed forms: log-grid scan plus golden refinement
    let (lo, hi) = ((LAMBDA_FLOOR * scale).ln(), (1e8 * scale).ln());
    let n = 400;
    let mut grid_best = (f64::NEG_INFINITY, 0usize);
    for i in 0..=n {
        let l = (lo + (hi - lo) * i as f64 / n as f64).exp();
        let val = value(l);
        if val > grid_best.0 {
            grid_best = (val, i);
        }
    }
    if grid_best.0 > best_v {
        let i = grid_best.1;
        let mut a = lo + (hi - lo) * (i.saturating_sub(1)) as f64 / n as f64;
        let mut b = lo + (hi - lo) * ((i + 1).min(n)) as f64 / n as f64;
        let gr = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = b - gr * (b - a);
            let m2 = a + gr * (b - a);
            if value(m1.exp()) < value(m2.exp()) {
                a = m1;
            } else {
                b = m2;
            }
        }
        let l = (0.5 * (a + b)).exp();
        if value(l) > best_v {
            best_l = l;
        }
    }
    if !best_l.is_finite() {
        return Err(MiceError::Divergence("dual search"));
    }
    Ok(DualScalars {
        lambda: best_l,
        nu: nu_of_lambda(best_l, u, v, c),
        degenerate,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve the feasible trust-region subproblem through H⁻¹ products.
pub fn cpo_dual_solve<F: Fn(&[f64]) -> Vec<f64>>(
    bundle: &GradientBundle,
    fvp: F,
    cfg: &TrustRegionConfig,
) -> Result<DualSolution> {
    let xg = conjugate_gradient(&fvp, &bundle.g, cfg.cg_iters, cfg.cg_tol)?.x;
    let xc = conjugate_gradient(&fvp, &bundle.g_c_ei, cfg.cg_iters, cfg.cg_tol)?.x;
    let q = dot(&bundle.g, &xg).max(0.0);
    let u = dot(&bundle.g, &xc);
    let v = dot(&bundle.g_c_ei, &xc).max(0.0);
    let c = bundle.c_surplus;
    dual_from_solves(q, u, v, c, &xg, &xc, cfg.phi)
}

/// Assemble λ*, ν* and the primal step from precomputed H⁻¹g and H⁻¹b.
pub fn dual_from_solves(q: f64, u: f64, v: f64, c: f64, xg: &[f64], xc: &[f64], phi: f64) -> Result<DualSolution> {
    let tiny_v = v < 1e-18;
    if tiny_v {
        // no usable constraint gradient
        if c > 0.0 {
            return Err(MiceError::Infeasible { c, v });
        }
        let lambda = if q > 0.0 { (q / (2.0 * phi)).sqrt() } else { LAMBDA_FLOOR };
        let step = if q > 0.0 { xg.iter().map(|x| x / lambda).collect() } else { vec![0.0; xg.len()] };
        return Ok(DualSolution {
            lambda_star: lambda,
            nu_star: 0.0,
            q,
            u,
            v,
            c,
            step,
            branch: Branch::Unconstrained,
        });
    }
    let ds = solve_dual_scalars(q, u, v, c, phi)?;
    let (lambda, nu) = (ds.lambda, ds.nu);
    let step: Vec<f64> = if nu > 0.0 {
        let uv = u / v;
        let cv = c / v;
        xg.iter()
            .zip(xc)
            .map(|(g, h)| {
                let first = if ds.degenerate { 0.0 } else { (g - uv * h) / lambda };
                first - cv * h
            })
            .collect()
    } else {
        xg.iter().map(|x| x / lambda).collect()
    };
    Ok(DualSolution {
        lambda_star: lambda,
        nu_star: nu,
        q,
        u,
        v,
        c,
        step,
        branch: if nu > 0.0 { Branch::Constrained } else { Branch::Unconstrained },
    })
}

/// Pure constraint-descent step −sqrt(2φ / bᵀH⁻¹b)·H⁻¹b, rescaled so that
/// ½ stepᵀH step = φ with the curvature measured by one extra product.
pub fn recovery_step<F: Fn(&[f64]) -> Vec<f64>>(
    bundle: &GradientBundle,
    fvp: F,
    cfg: &TrustRegionConfig,
) -> Result<Vec<f64>> {
    let xc = conjugate_gradient(&fvp, &bundle.g_c_ei, cfg.cg_iters, cfg.cg_tol)?.x;
    let v = dot(&bundle.g_c_ei, &xc);
    let hx = fvp(&xc);
    let vh = dot(&xc, &hx);
    if !(v > 1e-300) || !(vh > 1e-300) {
        return Err(MiceError::NoDescentDirection { v });
    }
    let scale = (2.0 * cfg.phi / vh).sqrt();
    Ok(xc.iter().map(|x| -scale * x).collect())
}
