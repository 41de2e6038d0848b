//! Minimal average energy `A_ε(ω)`, one-sided difference quotients across
//! neighbouring rotation vectors, the resulting gradient jumps and their
//! power-law fit in `ε`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::{solve_problem, CellProblem, DescentParams, MinimizerSolution};
use crate::error::{Error, JumpLeg, Result};
use crate::grid::{Field, RotationVector, TorusSpec};
use crate::lindstedt::analyze_resonance;
use crate::potential::PotentialSpec;

/// Per-unit-volume energy `(1/N^d) ∫ ½|ω + ∇z|² + εV(x, ω·x + z)` of a solution.
pub fn average_energy(sol: &MinimizerSolution, spec: &PotentialSpec) -> Result<f64> {
    let problem = CellProblem::new(*sol.z.torus(), sol.omega.clone(), sol.epsilon, spec)?;
    Ok(problem.energy(&sol.z))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub omega: RotationVector,
    pub epsilon: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub residual: f64,
    pub grid: TorusSpec,
}

impl EnergyRecord {
    pub fn from_solution(sol: &MinimizerSolution) -> Self {
        EnergyRecord {
            omega: sol.omega.clone(),
            epsilon: sol.epsilon,
            a: sol.energy,
            residual: sol.residual_linf,
            grid: *sol.z.torus(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JumpConfig {
    pub torus: TorusSpec,
    pub descent: DescentParams,
    /// Subtract the second difference `Δω` of the kinetic background `½ω_j²`.
    pub curvature_correction: bool,
    /// Start each ε of a sweep from the previous ε's solutions.
    pub warm_start: bool,
    pub probe_depth: usize,
    pub alpha_grid: usize,
}

impl Default for JumpConfig {
    fn default() -> Self {
        JumpConfig {
            torus: TorusSpec {
                d: 2,
                period: 16,
                m: 256,
            },
            descent: DescentParams::default(),
            curvature_correction: false,
            warm_start: false,
            probe_depth: 4,
            alpha_grid: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub epsilon: f64,
    pub direction: usize,
    pub delta_omega: f64,
    /// Initial constant of every solve.
    pub alpha: f64,
    pub a_center: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    /// `(A(ω+Δω e_j) − A(ω))/Δω`.
    pub dplus: f64,
    /// `(A(ω−Δω e_j) − A(ω))/Δω`.
    pub dminus: f64,
    pub jump: f64,
    pub residual_max: f64,
    pub iters_total: usize,
}

/// A coarse grid carrying one period of `ω` at no less resolution than `torus`;
/// resonance functions only depend on `ω` and `V`.
fn probe_torus(omega: &RotationVector, torus: &TorusSpec) -> TorusSpec {
    let q = omega.reduced().denominator;
    let per_unit = torus.nodes_per_unit().max(32);
    match u32::try_from(q) {
        Ok(q) => TorusSpec::new(torus.d, q, per_unit * q as usize).unwrap_or(*torus),
        Err(_) => *torus,
    }
}

/// Phase of the minimizing branch at `ω`, used as the constant initial guess.
pub fn minimizing_phase(
    spec: &PotentialSpec,
    omega: &RotationVector,
    cfg: &JumpConfig,
) -> Result<f64> {
    omega.lattice_numerators(&cfg.torus)?;
    let analysis = analyze_resonance(
        spec,
        omega,
        probe_torus(omega, &cfg.torus),
        cfg.probe_depth,
        cfg.alpha_grid,
    )?;
    Ok(analysis.minimizing_root())
}

struct Legs {
    omegas: [RotationVector; 3],
}

impl Legs {
    fn new(omega: &RotationVector, axis: usize, torus: &TorusSpec) -> Result<Self> {
        if axis >= torus.d {
            return Err(Error::InvalidParameter(format!(
                "direction {axis} outside 0..{}",
                torus.d
            )));
        }
        omega.lattice_numerators(torus)?;
        Ok(Legs {
            omegas: [
                omega.clone(),
                omega.shifted(torus, axis, 1)?,
                omega.shifted(torus, axis, -1)?,
            ],
        })
    }
}

const LEGS: [JumpLeg; 3] = [JumpLeg::Center, JumpLeg::Plus, JumpLeg::Minus];

fn jump_from_starts(
    spec: &PotentialSpec,
    legs: &Legs,
    epsilon: f64,
    axis: usize,
    alpha: f64,
    cfg: &JumpConfig,
    starts: [&Field; 3],
) -> Result<(JumpRecord, [Field; 3])> {
    let mut sols = Vec::with_capacity(3);
    for i in 0..3 {
        let problem = CellProblem::new(cfg.torus, legs.omegas[i].clone(), epsilon, spec)?;
        let sol =
            solve_problem(&problem, &cfg.descent, starts[i]).map_err(|e| Error::JumpSolve {
                leg: LEGS[i],
                source: Box::new(e),
            })?;
        sols.push(sol);
    }
    let dw = 1.0 / cfg.torus.period as f64;
    let (a0, ap, am) = (sols[0].energy, sols[1].energy, sols[2].energy);
    let bias = if cfg.curvature_correction {
        0.5 * dw
    } else {
        0.0
    };
    let dplus = (ap - a0) / dw - bias;
    let dminus = (am - a0) / dw - bias;
    let record = JumpRecord {
        epsilon,
        direction: axis,
        delta_omega: dw,
        alpha,
        a_center: a0,
        a_plus: ap,
        a_minus: am,
        dplus,
        dminus,
        jump: dplus + dminus,
        residual_max: sols.iter().map(|s| s.residual_linf).fold(0.0, f64::max),
        iters_total: sols.iter().map(|s| s.iterations).sum(),
    };
    let mut it = sols.into_iter().map(|s| s.z);
    let fields = [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()];
    Ok((record, fields))
}

/// Second-difference jump of `A_ε` across `ω` along `e_axis`, with step `Δω = 1/N`.
pub fn jump_estimate(
    spec: &PotentialSpec,
    omega: &RotationVector,
    epsilon: f64,
    axis: usize,
    cfg: &JumpConfig,
) -> Result<JumpRecord> {
    let legs = Legs::new(omega, axis, &cfg.torus)?;
    let alpha = minimizing_phase(spec, omega, cfg)?;
    let z0 = Field::constant(cfg.torus, alpha);
    Ok(jump_from_starts(spec, &legs, epsilon, axis, alpha, cfg, [&z0, &z0, &z0])?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub epsilon: f64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<JumpRecord>,
    pub failures: Vec<SweepFailure>,
    pub warm_start: bool,
}

/// One [`JumpRecord`] per `ε`. Cold starts run in parallel; warm starts run
/// in increasing `ε`, each from the previous solutions. Failures are
/// collected and the sweep continues.
pub fn sweep(
    spec: &PotentialSpec,
    omega: &RotationVector,
    epsilons: &[f64],
    axis: usize,
    cfg: &JumpConfig,
) -> Result<SweepResult> {
    if let Some(&bad) = epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {bad} must be positive"
        )));
    }
    if epsilons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "epsilons must be strictly increasing".into(),
        ));
    }
    if epsilons.is_empty() {
        return Ok(SweepResult {
            records: vec![],
            failures: vec![],
            warm_start: cfg.warm_start,
        });
    }
    let legs = Legs::new(omega, axis, &cfg.torus)?;
    let alpha = minimizing_phase(spec, omega, cfg)?;
    let z0 = Field::constant(cfg.torus, alpha);

    let outcomes: Vec<(f64, Result<JumpRecord>)> = if cfg.warm_start {
        let mut starts = [z0.clone(), z0.clone(), z0.clone()];
        let mut out = Vec::with_capacity(epsilons.len());
        for &eps in epsilons {
            match jump_from_starts(
                spec,
                &legs,
                eps,
                axis,
                alpha,
                cfg,
                [&starts[0], &starts[1], &starts[2]],
            ) {
                Ok((rec, fields)) => {
                    starts = fields;
                    out.push((eps, Ok(rec)));
                }
                Err(e) => out.push((eps, Err(e))),
            }
        }
        out
    } else {
        epsilons
            .par_iter()
            .map(|&eps| {
                (
                    eps,
                    jump_from_starts(spec, &legs, eps, axis, alpha, cfg, [&z0, &z0, &z0])
                        .map(|r| r.0),
                )
            })
            .collect()
    };

    let mut result = SweepResult {
        records: vec![],
        failures: vec![],
        warm_start: cfg.warm_start,
    };
    for (eps, outcome) in outcomes {
        match outcome {
            Ok(rec) => result.records.push(rec),
            Err(e) => result.failures.push(SweepFailure {
                epsilon: eps,
                message: e.to_string(),
            }),
        }
    }
    Ok(result)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    #[serde(rename = "C")]
    pub prefactor: f64,
    #[serde(rename = "p")]
    pub exponent: f64,
    #[serde(rename = "rms")]
    pub rms_log_residual: f64,
    #[serde(rename = "points")]
    pub points_used: usize,
}

/// Least-squares line `y = a + b x`; returns `(a, b, rms residual)`.
pub fn loglog_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return Err(Error::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("all abscissae coincide".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - a - b * x).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    Ok((a, b, rms))
}

/// Fits `jump = C ε^p` on `(log ε, log jump)`.
pub fn fit_power_law(records: &[JumpRecord]) -> Result<PowerLawFit> {
    if records.len() < 3 {
        return Err(Error::TooFewPoints(records.len()));
    }
    if let Some(r) = records.iter().find(|r| !(r.jump > 0.0)) {
        return Err(Error::NonPositiveJump {
            epsilon: r.epsilon,
            jump: r.jump,
        });
    }
    let xs: Vec<f64> = records.iter().map(|r| r.epsilon.ln()).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.jump.ln()).collect();
    let (a, b, rms) = loglog_line(&xs, &ys)?;
    Ok(PowerLawFit {
        prefactor: a.exp(),
        exponent: b,
        rms_log_residual: rms,
        points_used: records.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descent::solve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn synthetic(eps: f64, jump: f64) -> JumpRecord {
        JumpRecord {
            epsilon: eps,
            direction: 0,
            delta_omega: 0.0,
            alpha: 0.0,
            a_center: 0.0,
            a_plus: 0.0,
            a_minus: 0.0,
            dplus: jump,
            dminus: 0.0,
            jump,
            residual_max: 0.0,
            iters_total: 0,
        }
    }

    #[test]
    fn exact_power_laws_are_recovered() {
        let eps = [0.003, 0.01, 0.05, 0.1];
        let r: Vec<_> = eps.iter().map(|&e| synthetic(e, 1.8 * e.sqrt())).collect();
        let fit = fit_power_law(&r).unwrap();
        assert!((fit.prefactor - 1.8).abs() < 1e-12);
        assert!((fit.exponent - 0.5).abs() < 1e-12);
        assert!(fit.rms_log_residual < 1e-12);
        let r: Vec<_> = eps.iter().map(|&e| synthetic(e, 3.0 * e)).collect();
        let fit = fit_power_law(&r).unwrap();
        assert!((fit.prefactor - 3.0).abs() < 1e-12 && (fit.exponent - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_records() {
        let r = vec![synthetic(0.1, 1.0), synthetic(0.2, 2.0)];
        assert!(matches!(fit_power_law(&r), Err(Error::TooFewPoints(2))));
        let r = vec![
            synthetic(0.1, 1.0),
            synthetic(0.2, -2.0),
            synthetic(0.3, 1.0),
        ];
        match fit_power_law(&r) {
            Err(Error::NonPositiveJump { epsilon, .. }) => assert_eq!(epsilon, 0.2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unforced_energy_is_kinetic() {
        let t = TorusSpec::new(2, 4, 16).unwrap();
        let spec = PotentialSpec::product_cos(&[2, 3]);
        let omega = RotationVector::new(vec![5, -3], 4).unwrap();
        let a = 0.2;
        let z = Field::from_fn(t, |x| a * (2.0 * PI * x[0] / 4.0).sin());
        let problem = CellProblem::new(t, omega.clone(), 0.0, &spec).unwrap();
        let expect = 0.5 * omega.norm_sq() + 0.25 * a * a * (2.0 * PI / 4.0_f64).powi(2);
        assert!((problem.energy(&z) - expect).abs() < 1e-14);
        assert!((problem.energy(&Field::zeros(t)) - 0.5 * omega.norm_sq()).abs() < 1e-15);
    }

    #[test]
    fn energy_ignores_integer_lifts() {
        let t = TorusSpec::new(2, 1, 16).unwrap();
        let spec = PotentialSpec::mixed(&[2, 1]);
        let problem = CellProblem::new(t, RotationVector::integer(&[2, 1]), 0.3, &spec).unwrap();
        let z = Field::from_fn(t, |x| 0.1 * (2.0 * PI * x[1]).cos());
        assert!((problem.energy(&z) - problem.energy(&z.map(|v| v + 1.0))).abs() < 1e-13);
    }

    fn small_cfg() -> JumpConfig {
        JumpConfig {
            torus: TorusSpec::new(2, 4, 64).unwrap(),
            ..JumpConfig::default()
        }
    }

    #[test]
    fn unforced_jump() {
        let spec = PotentialSpec::product_cos(&[2, 3]);
        let omega = RotationVector::integer(&[2, 3]);
        let mut cfg = small_cfg();
        let raw = jump_estimate(&spec, &omega, 0.0, 0, &cfg).unwrap();
        assert!((raw.jump - 0.25).abs() < 1e-10);
        cfg.curvature_correction = true;
        let corrected = jump_estimate(&spec, &omega, 0.0, 0, &cfg).unwrap();
        assert!(corrected.jump.abs() < 1e-10);
        assert!((corrected.a_center - 6.5).abs() < 1e-12);
    }

    #[test]
    fn jump_is_nonnegative_and_convex() {
        let spec = PotentialSpec::product_cos(&[2, 3]);
        let omega = RotationVector::integer(&[2, 3]);
        for eps in [0.01, 0.05] {
            let r = jump_estimate(&spec, &omega, eps, 1, &small_cfg()).unwrap();
            assert!(r.jump >= -1e-6);
            assert!(r.a_center <= 0.5 * (r.a_plus + r.a_minus) + 1e-8);
            assert!((r.alpha - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn minimizer_beats_random_perturbations() {
        let t = TorusSpec::new(2, 2, 32).unwrap();
        let spec = PotentialSpec::product_cos(&[2, 3]);
        let omega = RotationVector::integer(&[2, 3]);
        let sol = solve(
            &omega,
            0.05,
            &spec,
            &DescentParams::default(),
            &Field::constant(t, 0.25),
        )
        .unwrap();
        let problem = CellProblem::new(t, omega, 0.05, &spec).unwrap();
        let e0 = problem.energy(&sol.z);
        assert!((e0 - average_energy(&sol, &spec).unwrap()).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (a, b, c): (f64, f64, f64) = (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..1.0),
            );
            let (p, q): (i32, i32) = (rng.gen_range(-3..=3), rng.gen_range(-3..=3));
            let delta = Field::from_fn(t, |x| {
                let th = PI * (p as f64 * x[0] + q as f64 * x[1]);
                5e-4 * (a * (th + 2.0 * PI * c).sin() + b)
            });
            assert!(delta.max_abs() <= 1e-3);
            assert!(problem.energy(&sol.z.axpy(1.0, &delta)) >= e0 - 1e-14);
        }
    }

    #[test]
    fn small_epsilon_energy_is_first_order() {
        let t = TorusSpec::new(2, 1, 32).unwrap();
        let spec = PotentialSpec::product_cos(&[2, 3]);
        let omega = RotationVector::integer(&[2, 3]);
        let mut xs = vec![];
        let mut ys = vec![];
        for eps in [1e-3, 2e-3, 4e-3, 8e-3] {
            let sol = solve(
                &omega,
                eps,
                &spec,
                &DescentParams::default(),
                &Field::constant(t, 0.25),
            )
            .unwrap();
            xs.push(f64::ln(eps));
            ys.push(f64::ln((sol.energy - 6.5).abs()));
        }
        let (_, slope, _) = loglog_line(&xs, &ys).unwrap();
        assert!((slope - 1.0).abs() < 0.05, "{slope}");
    }

    #[test]
    fn warm_and_cold_sweeps_agree() {
        let spec = PotentialSpec::product_cos(&[2, 3]);
        let omega = RotationVector::integer(&[2, 3]);
        let mut cfg = small_cfg();
        let eps = [0.01, 0.02, 0.04];
        let cold = sweep(&spec, &omega, &eps, 0, &cfg).unwrap();
        cfg.warm_start = true;
        let warm = sweep(&spec, &omega, &eps, 0, &cfg).unwrap();
        assert!(warm.warm_start && cold.failures.is_empty() && warm.failures.is_empty());
        for (a, b) in cold.records.iter().zip(&warm.records) {
            assert!((a.a_center - b.a_center).abs() <= 10.0 * cfg.descent.tol_residual);
            assert!((a.a_plus - b.a_plus).abs() <= 10.0 * cfg.descent.tol_residual);
        }
        for w in cold.records.windows(2) {
            assert!(w[1].jump > w[0].jump);
        }
    }

    #[test]
    fn sweep_edge_cases() {
        let spec = PotentialSpec::product_cos(&[2, 3]);
        let omega = RotationVector::integer(&[2, 3]);
        let r = sweep(&spec, &omega, &[], 0, &small_cfg()).unwrap();
        assert!(r.records.is_empty() && r.failures.is_empty());
        assert!(sweep(&spec, &omega, &[0.1, 0.05], 0, &small_cfg()).is_err());
        let mut cfg = small_cfg();
        cfg.descent.max_iters = 2;
        let r = sweep(&spec, &omega, &[0.01, 0.02], 0, &cfg).unwrap();
        assert_eq!(r.failures.len(), 2);
        assert!(r.failures[0].message.contains("center"));
    }
}
