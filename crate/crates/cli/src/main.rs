//! Command-line runner for the manifold IEKF attitude scenarios.
//!
//! ```text
//! iekf run scenario.toml --mode compare --output out.csv
//! ```
//!
//! Exit codes: 0 success, 1 runtime failure inside the filter, 2 config
//! missing/unreadable, 3 TOML syntax error, 4 invalid config contents,
//! 5 output write failure.

mod config;
mod error;
mod runner;

use std::io::{self, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Mode;
use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "iekf",
    version,
    about = "Attitude estimation scenarios with an iterated EKF on SO(3)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and filter it as described by a TOML config.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the TOML configuration file.
    config: PathBuf,
    /// Override the run mode from the config.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Override the Monte Carlo trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output CSV path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override the update variant.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
}

/// Mirror of [`Mode`] with clap's kebab-case names (`monte-carlo`).
#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Single,
    MonteCarlo,
    Compare,
}

impl From<ModeArg> for Mode {
    fn from(arg: ModeArg) -> Mode {
        match arg {
            ModeArg::Single => Mode::Single,
            ModeArg::MonteCarlo => Mode::MonteCarlo,
            ModeArg::Compare => Mode::Compare,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Standard,
    Qr,
    Information,
}

impl From<VariantArg> for iekf::UpdateVariant {
    fn from(arg: VariantArg) -> iekf::UpdateVariant {
        match arg {
            VariantArg::Standard => iekf::UpdateVariant::Standard,
            VariantArg::Qr => iekf::UpdateVariant::QrCompressed,
            VariantArg::Information => iekf::UpdateVariant::InformationForm,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // Best effort: a vanished stderr must not replace the documented
            // exit code with a panic.
            let _ = writeln!(io::stderr(), "error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let mut manifest = config::parse_config(&args.config)?;
    if let Some(mode) = args.mode {
        manifest.mode = mode.into();
    }
    if let Some(trials) = args.trials {
        if trials == 0 {
            return Err(CliError::ConfigValue(
                "--trials must be at least 1".to_owned(),
            ));
        }
        manifest.trials = trials;
    }
    if let Some(seed) = args.seed {
        manifest.scenario.seed = seed;
    }
    if let Some(output) = args.output {
        manifest.output_path = output;
    }
    if let Some(variant) = args.variant {
        manifest.filter.update_variant = variant.into();
    }
    runner::execute(&manifest)
}
