//! Quasi-implicit Sobolev-gradient descent for the cell problem
//! `Δz = ε V_y(x, ω·x + z)` on the torus.
//!
//! One step in Fourier space, with `s = γ + |ξ|^{2δ}` and `F = ε V_y`:
//!
//! ```text
//! ẑ_{n+1} = (ẑ_n − Δt s^{−β} F̂) / (1 + Δt s^{1−β} − γ Δt s^{−β})
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{gradient, shift, Field, RotationVector, SpectralField, TorusSpec};
use crate::potential::{PotentialSampler, PotentialSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentParams {
    pub beta: f64,
    pub gamma: f64,
    pub dt: f64,
    pub delta: f64,
    pub max_iters: usize,
    pub tol_residual: f64,
    pub tol_step: f64,
    /// Record `(iteration, residual, energy)` every this many iterations; 0 disables.
    pub trace_every: usize,
}

impl Default for DescentParams {
    fn default() -> Self {
        DescentParams {
            beta: 0.9,
            gamma: 1.0,
            dt: 0.5,
            delta: 1.0,
            max_iters: 200_000,
            tol_residual: 1e-9,
            tol_step: 1e-14,
            trace_every: 0,
        }
    }
}

impl DescentParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta = {} not in (0, 1]", self.beta));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma = {} must be positive", self.gamma));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta = {} not in (0, 1]", self.delta));
        }
        if !(self.tol_residual > 0.0) || !(self.tol_step > 0.0) {
            return bad("tolerances must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Residual,
    Step,
    MaxIters,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub residual: f64,
    pub energy: f64,
}

#[derive(Clone, Debug)]
pub struct MinimizerSolution {
    pub z: Field,
    pub omega: RotationVector,
    pub epsilon: f64,
    /// `‖Δz − εV_y(·, ω·x+z)‖_∞` at the returned iterate.
    pub residual_linf: f64,
    pub iterations: usize,
    /// Per-unit-volume value of the reduced functional.
    pub energy: f64,
    pub converged: bool,
    pub stop: StopReason,
    pub trace: Vec<TracePoint>,
}

/// Payload of [`Error::NonConvergence`].
#[derive(Clone, Debug)]
pub struct NonConvergence {
    pub last: MinimizerSolution,
    /// Residual after every iteration.
    pub residual_trace: Vec<f64>,
}

/// Per-mode coefficients of the step: `ẑ' = (ẑ − a·F̂) / b`.
#[derive(Clone, Debug)]
struct StepSymbols {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl StepSymbols {
    fn new(torus: &TorusSpec, p: &DescentParams) -> Result<Self> {
        let k2 = torus.wavenumber_sq();
        let mut a = Vec::with_capacity(k2.len());
        let mut b = Vec::with_capacity(k2.len());
        for &w in &k2 {
            let s = p.gamma + w.powf(p.delta);
            let den = 1.0 + p.dt * s.powf(1.0 - p.beta) - p.gamma * p.dt * s.powf(-p.beta);
            if !(den > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "step denominator {den:e} is not positive (gamma·dt too large)"
                )));
            }
            a.push(p.dt * s.powf(-p.beta));
            b.push(den);
        }
        Ok(StepSymbols { a, b })
    }

    fn apply(&self, zhat: &mut [Complex64], fhat: &[Complex64]) {
        for (((z, f), &a), &b) in zhat.iter_mut().zip(fhat).zip(&self.a).zip(&self.b) {
            *z = (*z - a * *f) / b;
        }
    }
}

/// Linear amplification factors `1/(1 + Δt s^{1−β} − γΔt s^{−β})` of the
/// homogeneous flow, one per Fourier mode. `β = 0` is accepted here.
pub fn amplification_factors(torus: &TorusSpec, p: &DescentParams) -> Vec<f64> {
    torus
        .wavenumber_sq()
        .into_iter()
        .map(|w| {
            let s = p.gamma + w.powf(p.delta);
            1.0 / (1.0 + p.dt * s.powf(1.0 - p.beta) - p.gamma * p.dt * s.powf(-p.beta))
        })
        .collect()
}

/// `max/min` of the amplification factors.
pub fn amplification_spread(torus: &TorusSpec, p: &DescentParams) -> f64 {
    let g = amplification_factors(torus, p);
    let max = g.iter().cloned().fold(f64::MIN, f64::max);
    let min = g.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

/// The cell problem at fixed `(ω, ε, V)` on one grid.
#[derive(Clone, Debug)]
pub struct CellProblem {
    torus: TorusSpec,
    omega: RotationVector,
    epsilon: f64,
    sampler: PotentialSampler,
    phase: Vec<f64>,
}

impl CellProblem {
    pub fn new(
        torus: TorusSpec,
        omega: RotationVector,
        epsilon: f64,
        spec: &PotentialSpec,
    ) -> Result<Self> {
        torus.validate()?;
        if !epsilon.is_finite() {
            return Err(Error::InvalidParameter("epsilon must be finite".into()));
        }
        let phase = omega.phase_at_nodes(&torus)?;
        let sampler = PotentialSampler::new(spec, torus)?;
        Ok(CellProblem {
            torus,
            omega,
            epsilon,
            sampler,
            phase,
        })
    }

    pub fn torus(&self) -> &TorusSpec {
        &self.torus
    }

    pub fn omega(&self) -> &RotationVector {
        &self.omega
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sampler(&self) -> &PotentialSampler {
        &self.sampler
    }

    fn argument(&self, z: &[f64]) -> Vec<f64> {
        self.phase.iter().zip(z).map(|(p, zv)| p + zv).collect()
    }

    /// `ε ∂ⁿ_y V(x, ω·x + z)` at the nodes.
    pub fn scaled_deriv(&self, n: usize, z: &Field) -> Field {
        let mut out = self.sampler.deriv_y_values(n, &self.argument(z.values()));
        for v in &mut out {
            *v *= self.epsilon;
        }
        Field::from_raw(self.torus, out)
    }

    /// `F(z) = ε V_y(x, ω·x + z)`.
    pub fn force(&self, z: &Field) -> Field {
        self.scaled_deriv(1, z)
    }

    /// `Δz − F(z)` in physical space, with the spectral Laplacian.
    pub fn residual(&self, z: &Field) -> Field {
        crate::grid::laplacian(z).sub(&self.force(z))
    }

    /// `(1/N^d) Σ_nodes [½|ω + ∇z|² + εV(x, ω·x + z)] h^d`, gradient spectral.
    pub fn energy(&self, z: &Field) -> f64 {
        let omega = self.omega.components();
        let grads = gradient(z);
        let potential = self.sampler.deriv_y_values(0, &self.argument(z.values()));
        let len = self.torus.len();
        let mut acc = 0.0;
        for i in 0..len {
            let mut kin = 0.0;
            for (axis, g) in grads.iter().enumerate() {
                let v = omega[axis] + g.values()[i];
                kin += v * v;
            }
            acc += 0.5 * kin + self.epsilon * potential[i];
        }
        acc / len as f64
    }
}

/// One descent step from `z`.
pub fn descent_step(
    z: &Field,
    omega: &RotationVector,
    epsilon: f64,
    spec: &PotentialSpec,
    p: &DescentParams,
) -> Result<Field> {
    p.validate()?;
    let problem = CellProblem::new(*z.torus(), omega.clone(), epsilon, spec)?;
    let symbols = StepSymbols::new(z.torus(), p)?;
    let mut zhat = z.forward();
    let fhat = problem.force(z).forward();
    symbols.apply(zhat.coeffs_mut(), fhat.coeffs());
    Ok(zhat.inverse())
}

fn laplacian_of(zhat: &SpectralField, k2: &[f64]) -> Field {
    let mut l = zhat.clone();
    for (c, &w) in l.coeffs_mut().iter_mut().zip(k2) {
        *c *= -w;
    }
    l.inverse()
}

/// Iterates [`descent_step`] from `z0` until the residual or the step size
/// falls below tolerance, or `max_iters` is reached.
pub fn solve(
    omega: &RotationVector,
    epsilon: f64,
    spec: &PotentialSpec,
    p: &DescentParams,
    z0: &Field,
) -> Result<MinimizerSolution> {
    let problem = CellProblem::new(*z0.torus(), omega.clone(), epsilon, spec)?;
    solve_problem(&problem, p, z0)
}

pub fn solve_problem(
    problem: &CellProblem,
    p: &DescentParams,
    z0: &Field,
) -> Result<MinimizerSolution> {
    p.validate()?;
    let torus = *problem.torus();
    if *z0.torus() != torus {
        return Err(Error::ShapeMismatch(
            "initial field lives on a different torus".into(),
        ));
    }
    let symbols = StepSymbols::new(&torus, p)?;
    let k2 = torus.wavenumber_sq();

    let mut z = z0.clone();
    let mut zhat = z.forward();
    let mut force = problem.force(&z);
    let mut residuals = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut residual;
    let stop;

    loop {
        residual = laplacian_of(&zhat, &k2).max_abs_diff(&force);
        residuals.push(residual);
        if p.trace_every > 0 && iterations % p.trace_every == 0 {
            trace.push(TracePoint {
                iteration: iterations,
                residual,
                energy: problem.energy(&z),
            });
        }
        if residual <= p.tol_residual {
            stop = StopReason::Residual;
            break;
        }
        if iterations >= p.max_iters {
            stop = StopReason::MaxIters;
            break;
        }
        let fhat = force.forward();
        symbols.apply(zhat.coeffs_mut(), fhat.coeffs());
        let next = zhat.inverse();
        let step = next.max_abs_diff(&z);
        z = next;
        force = problem.force(&z);
        iterations += 1;
        if step <= p.tol_step * p.dt {
            residual = laplacian_of(&zhat, &k2).max_abs_diff(&force);
            residuals.push(residual);
            stop = if residual <= p.tol_residual {
                StopReason::Residual
            } else {
                StopReason::Step
            };
            break;
        }
    }

    if p.trace_every > 0 && trace.last().map(|t| t.iteration) != Some(iterations) {
        trace.push(TracePoint {
            iteration: iterations,
            residual,
            energy: problem.energy(&z),
        });
    }
    let solution = MinimizerSolution {
        energy: problem.energy(&z),
        z,
        omega: problem.omega().clone(),
        epsilon: problem.epsilon(),
        residual_linf: residual,
        iterations,
        converged: residual <= p.tol_residual,
        stop,
        trace,
    };
    if solution.converged {
        Ok(solution)
    } else {
        Err(Error::NonConvergence(Box::new(NonConvergence {
            last: solution,
            residual_trace: residuals,
        })))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderSign {
    Positive,
    Negative,
    Zero,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffEntry {
    pub k: Vec<i64>,
    pub l: i64,
    pub sign: OrderSign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffReport {
    pub entries: Vec<BirkhoffEntry>,
}

impl BirkhoffReport {
    pub fn mixed(&self) -> impl Iterator<Item = &BirkhoffEntry> {
        self.entries.iter().filter(|e| e.sign == OrderSign::Mixed)
    }

    pub fn is_ordered(&self) -> bool {
        self.mixed().next().is_none()
    }
}

/// Classifies `u(x+k) + l − u(x)` for `u = ω·x + z` over all `|k_i|, |l| ≤ range`.
pub fn check_birkhoff(sol: &MinimizerSolution, range: i64) -> BirkhoffReport {
    let torus = *sol.z.torus();
    let d = torus.d;
    let omega = sol.omega.components();
    let r = range.min(torus.period as i64);
    let side = (2 * r + 1) as usize;
    let mut entries = Vec::new();
    for flat in 0..side.pow(d as u32) {
        let k: Vec<i64> = (0..d)
            .map(|a| ((flat / side.pow((d - 1 - a) as u32)) % side) as i64 - r)
            .collect();
        let offset: Vec<f64> = k.iter().map(|&c| c as f64).collect();
        let shifted = shift(&sol.z, &offset).expect("integer shifts are node aligned");
        let dz = shifted.sub(&sol.z);
        let wk: f64 = k.iter().zip(&omega).map(|(&ki, wi)| ki as f64 * wi).sum();
        for l in -range..=range {
            let c = wk + l as f64;
            let (lo, hi) = dz
                .values()
                .iter()
                .fold((f64::MAX, f64::MIN), |(lo, hi), &v| {
                    (lo.min(c + v), hi.max(c + v))
                });
            let sign = if lo.abs().max(hi.abs()) <= 1e-8 {
                OrderSign::Zero
            } else if lo > 0.0 {
                OrderSign::Positive
            } else if hi < 0.0 {
                OrderSign::Negative
            } else {
                OrderSign::Mixed
            };
            entries.push(BirkhoffEntry {
                k: k.clone(),
                l,
                sign,
            });
        }
    }
    BirkhoffReport { entries }
}
