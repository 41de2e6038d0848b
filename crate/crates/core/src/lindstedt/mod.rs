//! Lindstedt series `u = ω·x + α + Σ_{j≥1} ε^j u_j` for the Euler–Lagrange
//! equation `Δu = εV_y(x, u)`, the resonance functions `Φ_j(α)` that select
//! the phase `α`, and a Newton–Krylov refinement of truncated series.

mod newton;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{solve_poisson_zero_mean_with_tol, Field, RotationVector, TorusSpec};
use crate::potential::{PotentialSampler, PotentialSpec};

pub use newton::{newton_refine, NewtonOutcome, NewtonParams};

/// `max |Φ_j|` over the α-grid at or below which `Φ_j` counts as identically zero.
pub const PHI_ZERO_TOL: f64 = 1e-10;
/// Bisection width for roots of `Φ_j`.
pub const ROOT_TOL: f64 = 1e-12;
/// `|∫V_yy|` at or below which the twist condition fails.
pub const TWIST_TOL: f64 = 1e-10;

/// `∂ⁿ_y V(x, ω·x + α)` on a fixed grid, for varying `α`.
#[derive(Clone, Debug)]
struct AffineSampler {
    torus: TorusSpec,
    sampler: PotentialSampler,
    phase: Vec<f64>,
}

impl AffineSampler {
    fn new(spec: &PotentialSpec, omega: &RotationVector, torus: TorusSpec) -> Result<Self> {
        Ok(AffineSampler {
            torus,
            sampler: PotentialSampler::new(spec, torus)?,
            phase: omega.phase_at_nodes(&torus)?,
        })
    }

    fn deriv(&self, n: usize, alpha: f64) -> Field {
        let y: Vec<f64> = self.phase.iter().map(|p| p + alpha).collect();
        Field::from_raw(self.torus, self.sampler.deriv_y_values(n, &y))
    }

    /// `[D¹V, D²V, …, D^{count}V]` at `u_0 = ω·x + α`.
    fn derivs(&self, alpha: f64, count: usize) -> Vec<Field> {
        (1..=count).map(|n| self.deriv(n, alpha)).collect()
    }
}

/// `ε^{j−1}` coefficient of `V_y(x, u_0 + W)`, `W = Σ_{i≥1} ε^i u_i`:
/// `Σ_n D^{n+1}V/n! · [W^n]_{j−1}`. `derivs[n]` holds `D^{n+1}V` and
/// `terms[i]` holds `u_{i+1}`; only `u_1..u_{j−1}` are read.
fn composition_rhs(derivs: &[Field], terms: &[Field], j: usize) -> Field {
    let order = j - 1;
    let torus = *derivs[0].torus();
    if order == 0 {
        return derivs[0].clone();
    }
    // power[i] = [W^n]_i for the current n, i = 0..=order
    let mut power: Vec<Option<Field>> = (0..=order)
        .map(|i| {
            if i == 0 {
                None
            } else {
                Some(terms[i - 1].clone())
            }
        })
        .collect();
    let mut out = Field::zeros(torus);
    let mut factorial = 1.0;
    for n in 1..=order {
        factorial *= n as f64;
        if let Some(p) = &power[order] {
            let coeff = derivs[n].zip_map(p, |d, w| d * w);
            out = out.axpy(1.0 / factorial, &coeff);
        }
        if n == order {
            break;
        }
        let mut next: Vec<Option<Field>> = vec![None; order + 1];
        for (a, pa) in power.iter().enumerate() {
            let Some(pa) = pa else { continue };
            for b in 1..=order - a {
                let prod = pa.zip_map(&terms[b - 1], |x, y| x * y);
                next[a + b] = Some(match next[a + b].take() {
                    None => prod,
                    Some(acc) => acc.axpy(1.0, &prod),
                });
            }
        }
        power = next;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSource {
    /// Fixed by the next compatibility condition.
    Compatibility,
    /// The condition does not involve `λ` (vanishing twist); set to zero.
    Zero,
}

/// Truncated Lindstedt series of order `M`: the affine part `ω·x + α` and
/// periodic coefficients `u_1..u_{M−1}`, each `u_j = u_j* + λ^{(j)}`.
#[derive(Clone, Debug)]
pub struct SeriesField {
    pub torus: TorusSpec,
    pub omega: RotationVector,
    pub alpha: f64,
    pub order: usize,
    /// `u_j*` (zero mean), `j = 1..M−1`.
    pub zero_mean: Vec<Field>,
    /// `λ^{(j)}`, `j = 1..M−1`.
    pub lambdas: Vec<f64>,
    pub lambda_sources: Vec<LambdaSource>,
    /// Per-unit-volume `∫V_yy(x, u_0)`.
    pub twist: f64,
}

impl SeriesField {
    /// `u_j = u_j* + λ^{(j)}` for `j ≥ 1`.
    pub fn term(&self, j: usize) -> Field {
        self.zero_mean[j - 1].map(|v| v + self.lambdas[j - 1])
    }

    pub fn terms(&self) -> Vec<Field> {
        (1..self.order).map(|j| self.term(j)).collect()
    }
}

/// `Δu_j` as prescribed by the hierarchy: the `ε^{j−1}` coefficient of
/// `V_y(x, u^{<j})`.
pub fn series_coefficient_rhs(
    series: &SeriesField,
    j: usize,
    spec: &PotentialSpec,
) -> Result<Field> {
    if j == 0 || j > series.order {
        return Err(Error::InvalidParameter(format!(
            "order {j} outside 1..={}",
            series.order
        )));
    }
    let sampler = AffineSampler::new(spec, &series.omega, series.torus)?;
    let derivs = sampler.derivs(series.alpha, j);
    Ok(composition_rhs(&derivs, &series.terms(), j))
}

fn compat_tol(g: &Field) -> f64 {
    1e-9 * g.max_abs().max(1.0)
}

/// Builds `u_1..u_{M−1}` at phase `α`. Each `λ^{(j)}` is fixed by the
/// compatibility condition of order `j+1`, which is affine in `λ^{(j)}`
/// with slope `∫V_yy(x, u_0)`.
pub fn build_series(
    spec: &PotentialSpec,
    omega: &RotationVector,
    torus: TorusSpec,
    alpha: f64,
    order: usize,
) -> Result<SeriesField> {
    if order == 0 {
        return Err(Error::InvalidParameter(
            "series order must be at least 1".into(),
        ));
    }
    let sampler = AffineSampler::new(spec, omega, torus)?;
    let derivs = sampler.derivs(alpha, order.max(2));
    let twist = derivs[1].mean();

    let mut zero_mean: Vec<Field> = Vec::with_capacity(order - 1);
    let mut lambdas: Vec<f64> = Vec::with_capacity(order - 1);
    let mut sources = Vec::with_capacity(order - 1);
    let mut terms: Vec<Field> = Vec::with_capacity(order - 1);

    // fixes λ of the newest term from the compatibility condition of order j
    let close = |j: usize,
                 terms: &mut Vec<Field>,
                 lambdas: &mut Vec<f64>,
                 sources: &mut Vec<LambdaSource>| {
        let r0 = composition_rhs(&derivs, terms, j).mean();
        let last = terms.len() - 1;
        if twist.abs() > TWIST_TOL {
            let lambda = -r0 / twist;
            terms[last] = terms[last].map(|v| v + lambda);
            lambdas[last] = lambda;
            sources[last] = LambdaSource::Compatibility;
        }
    };

    for j in 1..order {
        if j >= 2 {
            close(j, &mut terms, &mut lambdas, &mut sources);
        }
        let rhs = composition_rhs(&derivs, &terms, j);
        let u = solve_poisson_zero_mean_with_tol(&rhs, compat_tol(&rhs))?;
        zero_mean.push(u.clone());
        terms.push(u);
        lambdas.push(0.0);
        sources.push(LambdaSource::Zero);
    }
    if order >= 2 {
        close(order, &mut terms, &mut lambdas, &mut sources);
    }

    Ok(SeriesField {
        torus,
        omega: omega.clone(),
        alpha,
        order,
        zero_mean,
        lambdas,
        lambda_sources: sources,
        twist,
    })
}

/// `z = Σ_{j≥1} ε^j u_j` by Horner's rule; the full approximation is
/// `ω·x + α + z`.
#[derive(Clone, Debug)]
pub struct SeriesEvaluation {
    pub z: Field,
    pub omega: RotationVector,
    pub alpha: f64,
}

impl SeriesEvaluation {
    /// `α + z`, the periodic part of `u − ω·x`.
    pub fn corrector(&self) -> Field {
        self.z.map(|v| v + self.alpha)
    }
}

pub fn eval_series(series: &SeriesField, epsilon: f64) -> SeriesEvaluation {
    let mut z = Field::zeros(series.torus);
    for j in (1..series.order).rev() {
        z = z.axpy(1.0, &series.term(j)).scale(epsilon);
    }
    SeriesEvaluation {
        z,
        omega: series.omega.clone(),
        alpha: series.alpha,
    }
}

/// `‖Δz − εV_y(x, ω·x + α + z)‖_∞` of the truncated series.
pub fn series_residual(series: &SeriesField, spec: &PotentialSpec, epsilon: f64) -> Result<f64> {
    let problem =
        crate::descent::CellProblem::new(series.torus, series.omega.clone(), epsilon, spec)?;
    Ok(problem
        .residual(&eval_series(series, epsilon).corrector())
        .max_abs())
}

/// Least-squares slope of `log residual` against `log ε`.
pub fn order_slope(series: &SeriesField, spec: &PotentialSpec, epsilons: &[f64]) -> Result<f64> {
    let mut xs = Vec::with_capacity(epsilons.len());
    let mut ys = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let r = series_residual(series, spec, eps)?;
        if !(r > 0.0) {
            return Err(Error::NonPositiveJump {
                epsilon: eps,
                jump: r,
            });
        }
        xs.push(eps.ln());
        ys.push(r.ln());
    }
    Ok(crate::energy::loglog_line(&xs, &ys)?.1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceAnalysis {
    pub potential: PotentialSpec,
    pub omega: RotationVector,
    /// First order `j*` with `Φ_{j*}` not identically zero, if any within the probe depth.
    pub resonance_order: Option<usize>,
    pub roots: Vec<f64>,
    /// `∫V_yy(x, ω·x + α)` at each root.
    pub twist_values: Vec<f64>,
    /// `dΦ_{j*}/dα` at each root (positive slope: a minimum of the effective potential).
    pub slopes: Vec<f64>,
    /// `∫V(x, ω·x + α)` at each root.
    pub averaged_potential: Vec<f64>,
}

impl ResonanceAnalysis {
    /// Phase of the minimizing branch: a root where `Φ_{j*}` increases,
    /// lowest averaged potential first. Without resonance any phase works and 0 is returned.
    pub fn minimizing_root(&self) -> f64 {
        let mut best: Option<usize> = None;
        for i in 0..self.roots.len() {
            if self.slopes[i] <= 0.0 {
                continue;
            }
            best = match best {
                Some(b) if self.averaged_potential[b] <= self.averaged_potential[i] => Some(b),
                _ => Some(i),
            };
        }
        best.map(|i| self.roots[i]).unwrap_or(0.0)
    }
}

/// `Φ_j(α)`: mean of the order-`j` right-hand side built from the zero-mean
/// branch with every `λ` set to zero.
fn phi(sampler: &AffineSampler, alpha: f64, j: usize) -> f64 {
    let derivs = sampler.derivs(alpha, j);
    let mut terms: Vec<Field> = Vec::with_capacity(j);
    for i in 1..j {
        let rhs = composition_rhs(&derivs, &terms, i);
        let centered = rhs.map({
            let m = rhs.mean();
            move |v| v - m
        });
        terms.push(
            solve_poisson_zero_mean_with_tol(&centered, f64::INFINITY).expect("mean removed"),
        );
    }
    composition_rhs(&derivs, &terms, j).mean()
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    while b - a > ROOT_TOL {
        let c = 0.5 * (a + b);
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if (fc > 0.0) == (fa > 0.0) {
            a = c;
            fa = fc;
        } else {
            b = c;
        }
    }
    0.5 * (a + b)
}

/// Scans `Φ_1, Φ_2, …` over `alpha_grid` phases in `[0,1)` and returns the
/// roots of the first one that is not identically zero.
pub fn analyze_resonance(
    spec: &PotentialSpec,
    omega: &RotationVector,
    torus: TorusSpec,
    probe_depth: usize,
    alpha_grid: usize,
) -> Result<ResonanceAnalysis> {
    if probe_depth == 0 {
        return Err(Error::InvalidParameter(
            "probe depth must be at least 1".into(),
        ));
    }
    if alpha_grid < 4 {
        return Err(Error::InvalidParameter(
            "alpha grid needs at least 4 points".into(),
        ));
    }
    let sampler = AffineSampler::new(spec, omega, torus)?;
    let mut analysis = ResonanceAnalysis {
        potential: spec.clone(),
        omega: omega.clone(),
        resonance_order: None,
        roots: vec![],
        twist_values: vec![],
        slopes: vec![],
        averaged_potential: vec![],
    };
    for j in 1..=probe_depth {
        let alphas: Vec<f64> = (0..alpha_grid)
            .map(|i| i as f64 / alpha_grid as f64)
            .collect();
        let values: Vec<f64> = alphas.par_iter().map(|&a| phi(&sampler, a, j)).collect();
        let max = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if max <= PHI_ZERO_TOL {
            continue;
        }
        let mut roots = Vec::new();
        for i in 0..alpha_grid {
            let (a, fa) = (alphas[i], values[i]);
            let (b, fb) = if i + 1 < alpha_grid {
                (alphas[i + 1], values[i + 1])
            } else {
                (1.0, values[0])
            };
            if fa == 0.0 {
                roots.push(a);
            } else if fa * fb < 0.0 {
                roots.push(bisect(|x| phi(&sampler, x, j), a, b, fa).rem_euclid(1.0));
            }
        }
        if roots.is_empty() {
            let min = values.iter().cloned().fold(f64::MAX, f64::min);
            let max = values.iter().cloned().fold(f64::MIN, f64::max);
            return Err(Error::NoRoot { order: j, min, max });
        }
        let h = 1e-5;
        for &r in &roots {
            let twist = sampler.deriv(2, r).mean();
            if j == 1 && twist.abs() <= TWIST_TOL {
                return Err(Error::DegenerateTwist { alpha: r, twist });
            }
            analysis.twist_values.push(twist);
            analysis
                .slopes
                .push((phi(&sampler, r + h, j) - phi(&sampler, r - h, j)) / (2.0 * h));
            analysis.averaged_potential.push(sampler.deriv(0, r).mean());
        }
        analysis.resonance_order = Some(j);
        analysis.roots = roots;
        return Ok(analysis);
    }
    Ok(analysis)
}

/// Per-order diagnostics of a series: `(j, max|u_j*|, rms u_j*, λ^{(j)})`.
pub fn series_norms(series: &SeriesField) -> Vec<(usize, f64, f64, f64)> {
    series
        .zero_mean
        .iter()
        .enumerate()
        .map(|(i, u)| (i + 1, u.max_abs(), u.inner(u).sqrt(), series.lambdas[i]))
        .collect()
}
