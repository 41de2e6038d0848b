use anyhow::anyhow;
use planecell::descent::{check_birkhoff, solve, BirkhoffReport, StopReason};
use planecell::energy::{
    fit_power_law, minimizing_phase, sweep, EnergyRecord, JumpRecord, PowerLawFit, SweepFailure,
};
use planecell::heteroclinic::{analytic_jump, build_profile, dae_quadrature, DaeResult};
use planecell::lindstedt::{
    analyze_resonance, build_series, series_norms, series_residual, SeriesField,
};
use planecell::{Error, Field, TorusSpec};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{nonempty_sweep, positive_sweep, ConfigError, RunConfig};
use crate::output::{num, summary_line, Writer};

/// A numerical failure that has already been written to `error.json`.
#[derive(Debug)]
pub struct NumericalFailure(pub String);

impl std::fmt::Display for NumericalFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericalFailure {}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidTorus(_) => "InvalidTorus",
        Error::InvalidParameter(_) => "InvalidParameter",
        Error::Incommensurate(_) => "Incommensurate",
        Error::ShapeMismatch(_) => "ShapeMismatch",
        Error::Misaligned { .. } => "Misaligned",
        Error::Compatibility { .. } => "Compatibility",
        Error::NonConvergence(_) => "NonConvergence",
        Error::JumpSolve { .. } => "JumpSolve",
        Error::NoRoot { .. } => "NoRoot",
        Error::DegenerateTwist { .. } => "DegenerateTwist",
        Error::LinearSolveStall { .. } => "LinearSolveStall",
        Error::TailError { .. } => "TailError",
        Error::NonPositiveJump { .. } => "NonPositiveJump",
        Error::TooFewPoints(_) => "TooFewPoints",
        Error::NotApplicable(_) => "NotApplicable",
    }
}

/// Writes `error.json` and converts to the exit-code carrying error.
fn fail(w: &Writer, e: Error) -> anyhow::Error {
    if let Error::NotApplicable(msg) = &e {
        return ConfigError(format!("not applicable: {msg}")).into();
    }
    let mut doc = json!({ "error": error_kind(&e), "message": e.to_string() });
    if let Error::NonConvergence(nc) = &e {
        doc["iterations"] = json!(nc.last.iterations);
        doc["residual"] = json!(nc.last.residual_linf);
    }
    match w.json("error.json", &doc) {
        Ok(_) => NumericalFailure(e.to_string()).into(),
        Err(io) => io,
    }
}

pub fn cmd_solve(cfg: &RunConfig) -> anyhow::Result<()> {
    let w = Writer::new(cfg)?;
    let alpha = if cfg.epsilon == 0.0 {
        0.0
    } else {
        minimizing_phase(&cfg.potential, &cfg.omega, &cfg.jump_config()).map_err(|e| fail(&w, e))?
    };
    let z0 = Field::constant(cfg.torus, alpha);
    let sol = solve(&cfg.omega, cfg.epsilon, &cfg.potential, &cfg.descent, &z0)
        .map_err(|e| fail(&w, e))?;
    w.field_dump("solution.bin", &sol.z, cfg.epsilon, &cfg.omega)?;
    let rows: Vec<Vec<String>> = sol
        .trace
        .iter()
        .map(|p| vec![p.iteration.to_string(), num(p.residual), num(p.energy)])
        .collect();
    w.csv("trace.csv", &["iteration", "residual", "energy"], &rows)?;
    let report = check_birkhoff(&sol, cfg.birkhoff_range);
    #[derive(Serialize)]
    struct Birkhoff<'a> {
        ordered: bool,
        range: i64,
        #[serde(flatten)]
        report: &'a BirkhoffReport,
    }
    w.json(
        "birkhoff.json",
        &Birkhoff {
            ordered: report.is_ordered(),
            range: cfg.birkhoff_range,
            report: &report,
        },
    )?;
    #[derive(Serialize)]
    struct Summary {
        initial_phase: f64,
        iterations: usize,
        stop: StopReason,
        converged: bool,
        #[serde(flatten)]
        record: EnergyRecord,
    }
    w.json(
        "summary.json",
        &Summary {
            initial_phase: alpha,
            iterations: sol.iterations,
            stop: sol.stop,
            converged: sol.converged,
            record: EnergyRecord::from_solution(&sol),
        },
    )?;
    println!(
        "{}",
        summary_line(&[
            ("energy", num(sol.energy)),
            ("residual", num(sol.residual_linf)),
            ("iterations", sol.iterations.to_string()),
            ("birkhoff_ordered", report.is_ordered().to_string()),
        ])
    );
    Ok(())
}

const SWEEP_COLUMNS: [&str; 12] = [
    "epsilon",
    "direction",
    "delta_omega",
    "alpha",
    "a_center",
    "a_plus",
    "a_minus",
    "dplus",
    "dminus",
    "jump",
    "residual_max",
    "iters_total",
];

fn sweep_row(r: &JumpRecord) -> Vec<String> {
    vec![
        num(r.epsilon),
        r.direction.to_string(),
        num(r.delta_omega),
        num(r.alpha),
        num(r.a_center),
        num(r.a_plus),
        num(r.a_minus),
        num(r.dplus),
        num(r.dminus),
        num(r.jump),
        num(r.residual_max),
        r.iters_total.to_string(),
    ]
}

pub fn cmd_jump_sweep(cfg: &RunConfig) -> anyhow::Result<()> {
    let eps = positive_sweep(cfg)?;
    let w = Writer::new(cfg)?;
    let result = sweep(
        &cfg.potential,
        &cfg.omega,
        &eps,
        cfg.direction,
        &cfg.jump_config(),
    )
    .map_err(|e| fail(&w, e))?;
    let rows: Vec<Vec<String>> = result.records.iter().map(sweep_row).collect();
    w.csv("sweep.csv", &SWEEP_COLUMNS, &rows)?;
    let log_rows: Vec<Vec<String>> = result
        .records
        .iter()
        .filter(|r| r.jump > 0.0)
        .map(|r| vec![num(r.epsilon.ln()), num(r.jump.ln())])
        .collect();
    w.dat("loglog.dat", &["log_epsilon", "log_jump"], &log_rows)?;
    let fit = fit_power_law(&result.records);
    #[derive(Serialize)]
    struct FitDoc<'a> {
        fit: Option<PowerLawFit>,
        fit_error: Option<String>,
        records: usize,
        failures: &'a [SweepFailure],
        warm_start: bool,
    }
    w.json(
        "fit.json",
        &FitDoc {
            fit: fit.as_ref().ok().copied(),
            fit_error: fit.as_ref().err().map(|e| e.to_string()),
            records: result.records.len(),
            failures: &result.failures,
            warm_start: result.warm_start,
        },
    )?;
    for f in &result.failures {
        eprintln!("epsilon {}: {}", f.epsilon, f.message);
    }
    match fit {
        Ok(f) => println!(
            "{}",
            summary_line(&[
                ("C", num(f.prefactor)),
                ("p", num(f.exponent)),
                ("rms", num(f.rms_log_residual))
            ])
        ),
        Err(e) => return Err(fail(&w, e)),
    }
    if !result.failures.is_empty() {
        return Err(NumericalFailure(format!(
            "{} of {} sweep points failed",
            result.failures.len(),
            eps.len()
        ))
        .into());
    }
    Ok(())
}

pub fn cmd_lindstedt(cfg: &RunConfig) -> anyhow::Result<()> {
    let eps = positive_sweep(cfg)?;
    let w = Writer::new(cfg)?;
    let analysis = analyze_resonance(
        &cfg.potential,
        &cfg.omega,
        cfg.torus,
        cfg.jump.probe_depth,
        cfg.jump.alpha_grid,
    )
    .map_err(|e| fail(&w, e))?;
    let alpha = analysis.minimizing_root();
    let series = build_series(
        &cfg.potential,
        &cfg.omega,
        cfg.torus,
        alpha,
        cfg.series_order,
    )
    .map_err(|e| fail(&w, e))?;
    #[derive(Serialize)]
    struct Resonance<'a> {
        #[serde(flatten)]
        analysis: &'a planecell::lindstedt::ResonanceAnalysis,
        minimizing_root: f64,
        twist: f64,
        lambdas: &'a [f64],
        lambda_sources: &'a [planecell::lindstedt::LambdaSource],
    }
    w.json(
        "resonance.json",
        &Resonance {
            analysis: &analysis,
            minimizing_root: alpha,
            twist: series.twist,
            lambdas: &series.lambdas,
            lambda_sources: &series.lambda_sources,
        },
    )?;
    let rows: Vec<Vec<String>> = series_norms(&series)
        .into_iter()
        .map(|(j, max, rms, lambda)| vec![j.to_string(), num(max), num(rms), num(lambda)])
        .collect();
    w.csv(
        "series_norms.csv",
        &["order", "max_abs", "rms", "lambda"],
        &rows,
    )?;

    let mut residuals = Vec::with_capacity(eps.len());
    for &e in &eps {
        residuals.push(series_residual(&series, &cfg.potential, e).map_err(|err| fail(&w, err))?);
    }
    let slope = if eps.len() >= 2 && residuals.iter().all(|r| *r > 0.0) {
        let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
        Some(
            planecell::energy::loglog_line(&xs, &ys)
                .map_err(|e| fail(&w, e))?
                .1,
        )
    } else {
        None
    };
    w.json(
        "order_check.json",
        &json!({
            "order": cfg.series_order,
            "epsilons": eps,
            "residuals": residuals,
            "slope": slope,
        }),
    )?;
    println!(
        "{}",
        summary_line(&[
            (
                "resonance_order",
                analysis
                    .resonance_order
                    .map_or("none".into(), |j| j.to_string())
            ),
            (
                "roots",
                analysis
                    .roots
                    .iter()
                    .map(|r| num(*r))
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            ("slope", slope.map_or("n/a".into(), num)),
        ])
    );
    Ok(())
}

/// One period of `ω` at no less than 64 nodes per unit length, enough to
/// resolve the harmonics of a third-order series.
fn series_torus(cfg: &RunConfig) -> anyhow::Result<TorusSpec> {
    let q = cfg.omega.reduced().denominator as u32;
    let per_unit = cfg.torus.nodes_per_unit().max(64);
    TorusSpec::new(cfg.torus.d, q, per_unit * q as usize)
        .map_err(|e| anyhow!(ConfigError(e.to_string())))
}

fn minimizing_series(cfg: &RunConfig, w: &Writer) -> anyhow::Result<SeriesField> {
    let torus = series_torus(cfg)?;
    let analysis = analyze_resonance(
        &cfg.potential,
        &cfg.omega,
        torus,
        cfg.jump.probe_depth,
        cfg.jump.alpha_grid,
    )
    .map_err(|e| fail(w, e))?;
    if analysis.resonance_order != Some(1) {
        return Err(ConfigError("heteroclinic layers need a first-order resonance".into()).into());
    }
    build_series(
        &cfg.potential,
        &cfg.omega,
        torus,
        analysis.minimizing_root(),
        cfg.series_order,
    )
    .map_err(|e| fail(w, e))
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

pub fn cmd_heteroclinic(cfg: &RunConfig) -> anyhow::Result<()> {
    let eps = positive_sweep(cfg)?;
    let w = Writer::new(cfg)?;
    let series = minimizing_series(cfg, &w)?;
    let results: Vec<planecell::Result<DaeResult>> = eps
        .par_iter()
        .map(|&e| dae_quadrature(e, cfg.direction, &cfg.potential, &series, &cfg.heteroclinic))
        .collect();
    let mut rows = Vec::new();
    for r in results {
        let r = r.map_err(|e| fail(&w, e))?;
        let analytic = analytic_jump(r.epsilon);
        rows.push(vec![
            num(r.epsilon),
            num(r.dplus),
            num(r.dminus),
            num(r.jump),
            num(analytic),
            num(relative_gap(r.jump, analytic)),
            num(r.plus.cross + r.minus.cross),
            num(r.plus.sech2 + r.minus.sech2),
            num(r.plus.potential + r.minus.potential),
        ]);
    }
    w.csv(
        "heteroclinic.csv",
        &[
            "epsilon",
            "dplus",
            "dminus",
            "jump",
            "jump_analytic",
            "relative_gap",
            "cross",
            "sech2",
            "potential",
        ],
        &rows,
    )?;
    let profile = build_profile(eps[0], cfg.direction, 1, 10.0, 4096).map_err(|e| fail(&w, e))?;
    let prow: Vec<Vec<String>> = profile
        .s
        .iter()
        .zip(&profile.alpha)
        .map(|(s, a)| vec![num(*s), num(*a)])
        .collect();
    w.dat("profile.dat", &["s", "alpha"], &prow)?;
    println!(
        "{}",
        summary_line(&[
            ("points", rows.len().to_string()),
            ("profile_ode_residual", num(profile.ode_residual)),
        ])
    );
    Ok(())
}

pub fn cmd_compare(cfg: &RunConfig) -> anyhow::Result<()> {
    let all = nonempty_sweep(cfg)?.to_vec();
    let w = Writer::new(cfg)?;
    let positive: Vec<f64> = if all.iter().any(|e| *e > 0.0) {
        positive_sweep(cfg)?
    } else {
        vec![]
    };
    let mut numeric = Vec::new();
    let mut dae = Vec::new();
    if !positive.is_empty() {
        let series = minimizing_series(cfg, &w)?;
        let result = sweep(
            &cfg.potential,
            &cfg.omega,
            &positive,
            cfg.direction,
            &cfg.jump_config(),
        )
        .map_err(|e| fail(&w, e))?;
        if let Some(f) = result.failures.first() {
            w.json(
                "error.json",
                &json!({ "error": "JumpSolve", "message": f.message, "epsilon": f.epsilon }),
            )?;
            return Err(NumericalFailure(format!("epsilon {}: {}", f.epsilon, f.message)).into());
        }
        numeric = result.records;
        dae = positive
            .par_iter()
            .map(|&e| dae_quadrature(e, cfg.direction, &cfg.potential, &series, &cfg.heteroclinic))
            .collect::<planecell::Result<Vec<_>>>()
            .map_err(|e| fail(&w, e))?;
    }
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    let mut eps_sorted = all.clone();
    eps_sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    eps_sorted.dedup();
    for &e in &eps_sorted {
        if e == 0.0 {
            rows.push(vec![num(0.0); 9]);
            continue;
        }
        let i = positive
            .iter()
            .position(|p| *p == e)
            .expect("positive epsilon");
        let (n, h) = (&numeric[i], &dae[i]);
        let analytic = analytic_jump(e);
        let g_num = relative_gap(n.jump, analytic);
        let g_dae = relative_gap(h.jump, analytic);
        let g_max = g_num.max(g_dae).max(relative_gap(n.jump, h.jump));
        gaps.push((e, g_max));
        rows.push(vec![
            num(e),
            num(h.dplus),
            num(h.dminus),
            num(analytic),
            num(n.jump),
            num(h.jump),
            num(g_num),
            num(g_dae),
            num(g_max),
        ]);
    }
    w.csv(
        "compare.csv",
        &[
            "epsilon",
            "dplus",
            "dminus",
            "jump_analytic",
            "jump_numeric",
            "jump_dae",
            "gap_numeric",
            "gap_dae",
            "relative_gap",
        ],
        &rows,
    )?;
    let max_gap = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
    w.json(
        "compare.json",
        &json!({
            "max_relative_gap": max_gap,
            "gaps": gaps.iter().map(|(e, g)| json!({"epsilon": e, "relative_gap": g})).collect::<Vec<_>>(),
        }),
    )?;
    println!(
        "{}",
        summary_line(&[
            ("points", rows.len().to_string()),
            ("max_relative_gap", num(max_gap))
        ])
    );
    Ok(())
}
