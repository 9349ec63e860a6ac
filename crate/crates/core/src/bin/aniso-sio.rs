use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aniso_sio::kernel::{builtin, validate, ValidationConfig};
use aniso_sio::verify::{list_experiments, run, ExperimentConfig, THREADS_ENV};

/// Empirical checks for singular integrals with mixed homogeneity.
#[derive(Parser)]
#[command(version, after_help = format!("Set {THREADS_ENV} to cap the number of worker threads."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the available experiments.
    ListExperiments,
    /// Check the kernel axioms for a built-in kernel.
    ValidateKernel {
        #[arg(long)]
        name: String,
    },
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> aniso_sio::Result<bool> {
    match command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run(&cfg)?;
            for c in &report.checks {
                println!("{} {} ({:.0} ms)", if c.pass { "PASS" } else { "FAIL" }, c.id, c.runtime_ms);
                if !c.note.is_empty() {
                    println!("     {}", c.note);
                }
            }
            if cfg.output.is_none() {
                println!("{}", report.to_json()?);
            }
            Ok(report.pass)
        }
        Command::ListExperiments => {
            for (name, summary) in list_experiments() {
                println!("{name:<24}{summary}");
            }
            Ok(true)
        }
        Command::ValidateKernel { name } => {
            let report = validate(&builtin(&name)?, &ValidationConfig::default())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.pass)
        }
    }
}
