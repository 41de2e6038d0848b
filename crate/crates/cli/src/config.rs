use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use planecell::descent::DescentParams;
use planecell::energy::JumpConfig;
use planecell::heteroclinic::DaeConfig;
use planecell::{PotentialSpec, RotationVector, TorusSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Settings of the jump estimate that are not already part of the run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JumpOptions {
    pub curvature_correction: bool,
    pub warm_start: bool,
    pub probe_depth: usize,
    pub alpha_grid: usize,
}

impl Default for JumpOptions {
    fn default() -> Self {
        let j = JumpConfig::default();
        JumpOptions {
            curvature_correction: j.curvature_correction,
            warm_start: j.warm_start,
            probe_depth: j.probe_depth,
            alpha_grid: j.alpha_grid,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub omega: RotationVector,
    pub torus: TorusSpec,
    pub descent: DescentParams,
    /// Coupling of a single solve.
    pub epsilon: f64,
    /// Couplings of sweeps, series order checks and comparisons.
    pub sweep: Vec<f64>,
    pub direction: usize,
    pub series_order: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub jump: JumpOptions,
    pub heteroclinic: DaeConfig,
    /// Integer translates `|k|, |l| ≤ birkhoff_range` checked after a solve.
    pub birkhoff_range: i64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            potential: PotentialSpec::product_cos(&[2, 3]),
            omega: RotationVector::integer(&[2, 3]),
            torus: JumpConfig::default().torus,
            descent: DescentParams {
                trace_every: 1,
                ..DescentParams::default()
            },
            epsilon: 0.01,
            sweep: vec![0.003, 0.005, 0.01, 0.02, 0.05, 0.1],
            direction: 0,
            series_order: 3,
            seed: 0,
            output_dir: PathBuf::from("out"),
            jump: JumpOptions::default(),
            heteroclinic: DaeConfig::default(),
            birkhoff_range: 2,
        }
    }
}

/// Invalid input, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

impl RunConfig {
    pub fn jump_config(&self) -> JumpConfig {
        JumpConfig {
            torus: self.torus,
            descent: self.descent,
            curvature_correction: self.jump.curvature_correction,
            warm_start: self.jump.warm_start,
            probe_depth: self.jump.probe_depth,
            alpha_grid: self.jump.alpha_grid,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let wrap = |e: planecell::Error| config_error(e.to_string());
        self.torus.validate().map_err(wrap)?;
        self.potential.validate(self.torus.d).map_err(wrap)?;
        if self.omega.dim() != self.torus.d {
            return Err(config_error(format!(
                "omega has {} components on a {}-dimensional torus",
                self.omega.dim(),
                self.torus.d
            )));
        }
        self.omega.lattice_numerators(&self.torus).map_err(wrap)?;
        self.descent.validate().map_err(wrap)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(config_error(format!(
                "epsilon {} must be nonnegative",
                self.epsilon
            )));
        }
        if let Some(e) = self.sweep.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return Err(config_error(format!("sweep value {e} must be nonnegative")));
        }
        if self.direction >= self.torus.d {
            return Err(config_error(format!(
                "direction {} outside the {}-dimensional torus",
                self.direction, self.torus.d
            )));
        }
        if self.series_order == 0 {
            return Err(config_error("series_order must be at least 1"));
        }
        if self.birkhoff_range < 0 {
            return Err(config_error("birkhoff_range must be nonnegative"));
        }
        Ok(())
    }
}

/// Parses the right-hand side of `--set path=value`: JSON if it parses,
/// a bare string otherwise.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Applies `a.b.c=value` to a JSON document, creating objects on the way.
pub fn apply_override(doc: &mut Value, assignment: &str) -> anyhow::Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(format!("override '{assignment}' is not path=value")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_error(format!("bad override path '{path}'")));
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let map = node
            .as_object_mut()
            .ok_or_else(|| config_error(format!("'{path}' descends into a non-object")))?;
        node = map
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let map = node
        .as_object_mut()
        .ok_or_else(|| config_error(format!("'{path}' descends into a non-object")))?;
    map.insert(keys[keys.len() - 1].to_string(), parse_value(raw));
    Ok(())
}

/// Reads the config file (or starts from defaults), applies overrides and validates.
pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(|e| config_error(format!("{e:#}")))?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| config_error(format!("{}: {e}", p.display())))?
        }
        None => serde_json::to_value(RunConfig::default())?,
    };
    if !doc.is_object() {
        bail!(ConfigError("config must be a JSON object".into()));
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| config_error(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn is_config_error(e: &anyhow::Error) -> bool {
    e.downcast_ref::<ConfigError>().is_some()
}

pub fn nonempty_sweep(cfg: &RunConfig) -> anyhow::Result<&[f64]> {
    if cfg.sweep.is_empty() {
        return Err(config_error("sweep: the epsilon list is empty"));
    }
    Ok(&cfg.sweep)
}

pub fn positive_sweep(cfg: &RunConfig) -> anyhow::Result<Vec<f64>> {
    let eps = nonempty_sweep(cfg)?;
    let mut out: Vec<f64> = eps.iter().copied().filter(|e| *e > 0.0).collect();
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    out.dedup();
    if out.is_empty() {
        return Err(anyhow!(ConfigError("sweep has no positive epsilon".into())));
    }
    Ok(out)
}
