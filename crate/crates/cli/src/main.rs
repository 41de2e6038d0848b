use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use planecell_cli::commands;
use planecell_cli::config::{self, is_config_error, ConfigError};

#[derive(Parser)]
#[command(
    name = "planecell",
    version,
    about = "Plane-like minimizers, averaged energies and their gradient jumps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults are used when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config field by dotted path, e.g. `torus.m=128`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set output_dir=DIR`.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize at one ε; writes the field dump, residual trace and Birkhoff report.
    Solve(Common),
    /// Jumps over the ε sweep with a power-law fit.
    JumpSweep(Common),
    /// Resonance analysis and Lindstedt series diagnostics.
    Lindstedt(Common),
    /// One-sided derivatives from the heteroclinic layer energy.
    Heteroclinic(Common),
    /// Numeric, layer-energy and analytic jumps side by side.
    Compare(Common),
    /// Print the default configuration.
    Defaults,
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("PLANECELL_THREADS") else {
        return Ok(());
    };
    let n: usize =
        raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            ConfigError(format!("PLANECELL_THREADS={raw} is not a positive integer"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    let (common, cmd): (Common, fn(&config::RunConfig) -> anyhow::Result<()>) = match cli.command {
        Command::Solve(c) => (c, commands::cmd_solve),
        Command::JumpSweep(c) => (c, commands::cmd_jump_sweep),
        Command::Lindstedt(c) => (c, commands::cmd_lindstedt),
        Command::Heteroclinic(c) => (c, commands::cmd_heteroclinic),
        Command::Compare(c) => (c, commands::cmd_compare),
        Command::Defaults => {
            println!(
                "{}",
                serde_json::to_string_pretty(&config::RunConfig::default())?
            );
            return Ok(());
        }
    };
    let mut cfg = config::load(common.config.as_deref(), &common.overrides)?;
    if let Some(dir) = common.output_dir {
        cfg.output_dir = dir;
    }
    cmd(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
