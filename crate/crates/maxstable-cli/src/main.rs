//! `maxstable` — simulation and inference for stationary max-stable
//! random fields on lattice windows.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use maxstable_cli::{
    cmd_bounds, cmd_clt_verify, cmd_coupling, cmd_estimate, cmd_simulate, cmd_variance_opt,
    CliError, CommandOutcome, ExperimentConfig, OutputFormat,
};

#[derive(Debug, Parser)]
#[command(
    name = "maxstable",
    about = "Simulation, estimation, mixing bounds, and point-process couplings \
             for stationary max-stable random fields on Z^d windows",
    long_about = None,
    version
)]
struct Cli {
    /// Flat `key = value` configuration file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Root seed for all random streams.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads (never changes any output byte). The
    /// MAXSTABLE_WORKERS environment variable sets the same knob with
    /// lower precedence than this flag.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Data-file format for sample dumps.
    #[arg(long, global = true, value_name = "csv|json")]
    format: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw field replicates and write them to disk.
    Simulate,
    /// Run the pair-coefficient estimators over replicates.
    Estimate,
    /// Check asymptotic normality of an estimator against its predicted
    /// variance (exit 4 on a FAIL verdict).
    CltVerify,
    /// Tabulate mixing-coefficient bounds and the CLT decay condition.
    Bounds,
    /// Run the extremal-decomposition coupling experiments (exit 4 if the
    /// probability/intensity ordering is violated).
    Coupling,
    /// Minimize the threshold estimator's asymptotic variance over y.
    VarianceOpt,
}

fn build_config(cli: &Cli) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    // Precedence: file < environment (workers only) < flags.
    if let Ok(value) = std::env::var("MAXSTABLE_WORKERS") {
        config.workers = value.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "MAXSTABLE_WORKERS must be a positive integer, got `{value}`"
            ))
        })?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if let Some(out) = &cli.out {
        config.out = out.display().to_string();
    }
    if let Some(format) = &cli.format {
        config.format = match format.as_str() {
            "csv" => OutputFormat::Csv,
            "json" => OutputFormat::Json,
            other => {
                return Err(CliError::Config(format!(
                    "--format must be csv or json, got `{other}`"
                )))
            }
        };
    }
    config.validate()?;
    let out = PathBuf::from(&config.out);
    Ok((config, out))
}

fn run(cli: &Cli) -> Result<CommandOutcome, CliError> {
    let (config, out) = build_config(cli)?;
    match cli.command {
        Command::Simulate => cmd_simulate(&config, &out),
        Command::Estimate => cmd_estimate(&config, &out),
        Command::CltVerify => cmd_clt_verify(&config, &out),
        Command::Bounds => cmd_bounds(&config, &out),
        Command::Coupling => cmd_coupling(&config, &out),
        Command::VarianceOpt => cmd_variance_opt(&config, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            match outcome.test_failure {
                None => ExitCode::SUCCESS,
                Some(reason) => {
                    // Files are already on disk for post-mortem analysis.
                    eprintln!("test failed: {reason}");
                    ExitCode::from(CliError::TestFailed(reason).exit_code())
                }
            }
        }
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
