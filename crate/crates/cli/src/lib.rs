//! Command-line front end for the `kitwpa` toolkit.
//!
//! Every command reads one TOML project file (or the built-in paper
//! defaults), validates all of it, and writes CSV, JSON and Touchstone
//! files plus a `<command>.plots.json` manifest into the output directory.
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 I/O.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{Context, Report};
use crate::config::{GridSpec, ProjectConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "kitwpa", version, about = "Kinetic-inductance TWPA design and noise calibration")]
pub struct Cli {
    /// Project file (TOML). The shipped paper defaults are used when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for synthetic data; overrides `synth.seed`.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Frequency grid for the command, in Hz.
    #[arg(long, global = true, value_name = "START:STOP:POINTS")]
    pub grid: Option<GridSpec>,
    /// Validate the configuration and exit.
    #[arg(long, global = true)]
    pub validate: bool,
    /// Asymmetry bounds for `fit`.
    #[arg(long, global = true, value_name = "LO,HI", value_parser = parse_bounds)]
    pub bounds: Option<(f64, f64)>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Geometry summary and the first stopbands.
    Design,
    /// Simulated gain profile and 3 dB band.
    Gain,
    /// Coupler and bias tee S-parameters.
    Components,
    /// Input-referred noise budget of the readout chain.
    NoiseBudget,
    /// Synthetic SNTJ sweeps.
    Synth,
    /// Fit SNTJ sweeps and report band medians.
    Fit {
        /// Directory of sweep CSVs (default `<out>/sweeps`).
        #[arg(long, value_name = "DIR")]
        sweeps: Option<PathBuf>,
    },
}

fn parse_bounds(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected LO,HI, got `{s}`"))?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("`{x}` is not a number"));
    let (lo, hi) = (num(a)?, num(b)?);
    if !(lo < hi) {
        return Err(format!("need LO < HI, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

/// What a successful invocation did.
#[derive(Debug)]
pub enum Outcome {
    Validated,
    Ran(Report),
}

pub fn load_context(cli: &Cli) -> Result<Context, CliError> {
    let (config, config_dir) = match &cli.config {
        Some(p) => (
            ProjectConfig::load(p)?,
            p.parent().map(|d| d.to_path_buf()).unwrap_or_default(),
        ),
        None => (ProjectConfig::paper_defaults(), PathBuf::new()),
    };
    config.validate()?;
    let sweeps = match &cli.command {
        Some(Command::Fit { sweeps }) => sweeps.clone(),
        _ => None,
    };
    Ok(Context {
        out: cli.out.clone().unwrap_or_else(|| config.output.dir.clone()),
        config,
        config_dir,
        seed: cli.seed,
        grid: cli.grid,
        asymmetry_bounds: cli.bounds,
        sweeps,
    })
}

/// Run one invocation. A `fit` with failed sweeps writes its files and
/// then returns a numerical error.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let ctx = load_context(cli)?;
    if cli.validate {
        return Ok(Outcome::Validated);
    }
    let Some(cmd) = &cli.command else {
        return Err(CliError::Validation(vec!["no command given (try --help)".into()]));
    };
    let report = match cmd {
        Command::Design => commands::design(&ctx)?,
        Command::Gain => commands::gain(&ctx)?,
        Command::Components => commands::components(&ctx)?,
        Command::NoiseBudget => commands::noise_budget_cmd(&ctx)?,
        Command::Synth => commands::synth(&ctx)?,
        Command::Fit { .. } => {
            let (report, failed) = commands::fit(&ctx)?;
            if failed > 0 {
                eprintln!("{}", report.summary);
                return Err(CliError::Numerical(format!("{failed} sweep fit(s) failed")));
            }
            report
        }
    };
    Ok(Outcome::Ran(report))
}
