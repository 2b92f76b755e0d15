//! `lpmkl`: runs one experiment from a JSON config and writes CSV and JSON results.

mod commands;
mod error;
mod experiment;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{
    bounds::BoundsConfig, estimate::EstimateConfig, excess::ExcessConfig, nu_curve::NuCurveConfig,
    sandwich::SandwichConfig, verify::VerifyCommand,
};
use error::CliError;
use experiment::{execute, Experiment, Invocation};

#[derive(Parser)]
#[command(name = "lpmkl", version, about = "Rademacher complexity bounds for lp-norm multiple kernel learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic global and local complexity bounds over a grid of radii.
    Bounds(Common),
    /// The bound factor nu(p) for soft-sparse Bayes vectors.
    NuCurve(Common),
    /// Lower bound, Monte Carlo estimate and upper bound of the local complexity.
    Sandwich(Common),
    /// Fixed-point and rate excess-risk bounds over sample sizes.
    Excess(Common),
    /// The inequality suites.
    Verify(Common),
    /// Raw Monte Carlo estimates of the global and local complexities.
    Estimate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
}

fn dispatch<T: Experiment>(c: Common) -> Result<(), CliError> {
    if let Some(n) = c.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    execute::<T>(&Invocation { config: c.config, out: c.out, seed: c.seed })
}

fn main() -> ExitCode {
    let res = match Cli::parse().command {
        Command::Bounds(c) => dispatch::<BoundsConfig>(c),
        Command::NuCurve(c) => dispatch::<NuCurveConfig>(c),
        Command::Sandwich(c) => dispatch::<SandwichConfig>(c),
        Command::Excess(c) => dispatch::<ExcessConfig>(c),
        Command::Verify(c) => dispatch::<VerifyCommand>(c),
        Command::Estimate(c) => dispatch::<EstimateConfig>(c),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
