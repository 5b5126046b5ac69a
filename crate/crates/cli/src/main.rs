use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use revjump_cli::diagnose::{self, DiagnoseOptions};
use revjump_cli::estimate::{self, EstimateOptions};
use revjump_cli::run::{self, Overrides};
use revjump_cli::CliResult;

#[derive(Parser)]
#[command(name = "revjump", version, about = "Reversible jump MCMC sampler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample from a TOML run configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        replicates: Option<usize>,
        /// 0 uses every processor.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        iterations: Option<u64>,
        #[arg(long)]
        burnin: Option<u64>,
        #[arg(long)]
        thin: Option<u64>,
    },
    /// Convergence diagnostics for run directories or trace files.
    Diagnose {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Keep every lag-th sample.
        #[arg(long, default_value_t = 1)]
        lag: usize,
        #[arg(long, default_value_t = 20)]
        checkpoints: usize,
        #[arg(long, default_value_t = 100)]
        reference_points: usize,
        /// Seed for the reference-point draw.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Drop samples up to this iteration.
        #[arg(long, default_value_t = 0)]
        burnin: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Posterior model probabilities and Bayes factors.
    Estimate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        burnin: u64,
        /// Use burn-in attempts in the bridge estimate.
        #[arg(long)]
        include_burnin_attempts: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A closed stdout (e.g. piped into `head`) is not an error.
fn print(value: &impl serde::Serialize) {
    let text = serde_json::to_string_pretty(value).expect("serialisable");
    let _ = writeln!(std::io::stdout(), "{text}");
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            replicates,
            workers,
            iterations,
            burnin,
            thin,
        } => {
            let overrides = Overrides {
                seed,
                replicates,
                workers,
                burn_in: burnin,
                thin,
                iterations,
            };
            print(&run::run(&config, out.as_deref(), &overrides)?);
        }
        Command::Diagnose {
            inputs,
            lag,
            checkpoints,
            reference_points,
            seed,
            burnin,
            out,
        } => {
            let report = diagnose::diagnose(&DiagnoseOptions {
                inputs,
                lag,
                checkpoints,
                reference_points,
                seed,
                burn_in: burnin,
                out,
            })?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print(&serde_json::json!({
                "chains": report.chains,
                "samples": report.samples,
                "warnings": report.warnings,
            }));
        }
        Command::Estimate {
            inputs,
            burnin,
            include_burnin_attempts,
            out,
        } => {
            let report = estimate::estimate(&EstimateOptions {
                inputs,
                burn_in: burnin,
                include_burn_in_attempts: include_burnin_attempts,
                out,
            })?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print(&report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
