use serde::{Deserialize, Serialize};

use crate::descent::{CellProblem, MinimizerSolution, NonConvergence, StopReason};
use crate::error::{Error, Result};
use crate::grid::{laplacian, Field, RotationVector};
use crate::potential::PotentialSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonParams {
    pub max_iters: usize,
    pub tol_residual: f64,
    /// Relative `L²` tolerance of each linear solve.
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Shift of the preconditioner `(γ − Δ)^{−1}`.
    pub gamma: f64,
}

impl Default for NewtonParams {
    fn default() -> Self {
        NewtonParams {
            max_iters: 20,
            tol_residual: 1e-10,
            cg_tol: 1e-12,
            cg_max_iters: 1000,
            gamma: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub solution: MinimizerSolution,
    /// `‖Δz − εV_y‖_∞` before each step and after the last.
    pub residuals: Vec<f64>,
    pub cg_iterations: Vec<usize>,
}

/// `L v = −Δv + c·v` with `c = εV_yy(x, u)`.
fn apply(c: &[f64], v: &Field) -> Field {
    let lap = laplacian(v);
    let vals = lap
        .values()
        .iter()
        .zip(v.values())
        .zip(c)
        .map(|((l, x), ci)| -l + ci * x)
        .collect();
    Field::new(*v.torus(), vals).expect("finite")
}

fn precondition(gamma: f64, r: &Field) -> Field {
    let k2 = r.torus().wavenumber_sq();
    let mut s = r.forward();
    for (c, &w) in s.coeffs_mut().iter_mut().zip(&k2) {
        *c /= gamma + w;
    }
    s.inverse()
}

/// Smallest eigenvalue of the symmetric tridiagonal matrix `(diag, off)` by
/// Sturm-sequence bisection.
fn smallest_eigenvalue(diag: &[f64], off: &[f64]) -> f64 {
    if diag.is_empty() {
        return f64::NAN;
    }
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for i in 0..diag.len() {
        let r = off.get(i).map_or(0.0, |v| v.abs()) + if i > 0 { off[i - 1].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    // number of eigenvalues below x
    let count = |x: f64| {
        let mut n = 0;
        let mut q = 1.0;
        for i in 0..diag.len() {
            let e2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            q = diag[i] - x - if i > 0 { e2 / q } else { 0.0 };
            if q == 0.0 {
                q = f64::EPSILON * (1.0 + x.abs());
            }
            if q < 0.0 {
                n += 1;
            }
        }
        n
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Preconditioned conjugate gradients for `L η = g`; returns `η` and the
/// iteration count.
fn pcg(c: &[f64], g: &Field, p: &NewtonParams) -> Result<(Field, usize)> {
    let torus = *g.torus();
    let norm_g = g.inner(g).sqrt();
    let mut x = Field::zeros(torus);
    if norm_g == 0.0 {
        return Ok((x, 0));
    }
    let mut r = g.clone();
    let mut zr = precondition(p.gamma, &r);
    let mut dir = zr.clone();
    let mut rz = r.inner(&zr);
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let stall = |k: usize, rel: f64, alphas: &[f64], betas: &[f64]| {
        let n = alphas.len();
        let mut diag = Vec::with_capacity(n);
        let mut off = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let mut d = 1.0 / alphas[i];
            if i > 0 {
                d += betas[i - 1] / alphas[i - 1];
                off.push(betas[i - 1].sqrt() / alphas[i - 1]);
            }
            diag.push(d);
        }
        Error::LinearSolveStall {
            iterations: k,
            relative_residual: rel,
            smallest_ritz: smallest_eigenvalue(&diag, &off),
        }
    };
    for k in 0..p.cg_max_iters {
        let ld = apply(c, &dir);
        let curvature = dir.inner(&ld);
        if !(curvature > 0.0) {
            return Err(stall(k, r.inner(&r).sqrt() / norm_g, &alphas, &betas));
        }
        let alpha = rz / curvature;
        alphas.push(alpha);
        x = x.axpy(alpha, &dir);
        r = r.axpy(-alpha, &ld);
        let rel = r.inner(&r).sqrt() / norm_g;
        if rel <= p.cg_tol {
            return Ok((x, k + 1));
        }
        zr = precondition(p.gamma, &r);
        let rz_next = r.inner(&zr);
        let beta = rz_next / rz;
        betas.push(beta);
        rz = rz_next;
        dir = zr.axpy(beta, &dir);
    }
    let rel = r.inner(&r).sqrt() / norm_g;
    Err(stall(p.cg_max_iters, rel, &alphas, &betas))
}

/// Newton's method `z ← z − L^{−1}(−Δz + εV_y)` from `start`, the periodic
/// part of `u − ω·x` (phase included).
pub fn newton_refine(
    start: &Field,
    omega: &RotationVector,
    epsilon: f64,
    spec: &PotentialSpec,
    params: &NewtonParams,
) -> Result<NewtonOutcome> {
    let problem = CellProblem::new(*start.torus(), omega.clone(), epsilon, spec)?;
    let mut z = start.clone();
    let mut residuals = Vec::new();
    let mut cg_iterations = Vec::new();
    let mut iterations = 0;
    loop {
        let r = problem.residual(&z);
        let res = r.max_abs();
        residuals.push(res);
        let done = res <= params.tol_residual;
        if done || iterations >= params.max_iters {
            let solution = MinimizerSolution {
                energy: problem.energy(&z),
                z,
                omega: omega.clone(),
                epsilon,
                residual_linf: res,
                iterations,
                converged: done,
                stop: if done {
                    StopReason::Residual
                } else {
                    StopReason::MaxIters
                },
                trace: vec![],
            };
            if done {
                return Ok(NewtonOutcome {
                    solution,
                    residuals,
                    cg_iterations,
                });
            }
            return Err(Error::NonConvergence(Box::new(NonConvergence {
                last: solution,
                residual_trace: residuals,
            })));
        }
        let c = problem.scaled_deriv(2, &z).into_values();
        let (eta, its) = pcg(&c, &r.scale(-1.0), params)?;
        cg_iterations.push(its);
        z = z.sub(&eta);
        iterations += 1;
    }
}
