use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eqpert_cli::config::{self, ConfigError, ExperimentId};
use eqpert_cli::{run_and_write, worker_count, WORKERS_ENV};

#[derive(Parser)]
#[command(name = "eqpert", version, about = "Equilibrium-perturbation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a configuration, run it and write artifacts.
    Run {
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a configuration and print the effective version.
    Validate { config: PathBuf },
    /// List experiment ids.
    ListExperiments,
}

fn load(path: &PathBuf) -> Result<config::Validated, ConfigError> {
    config::validate(&config::load(path)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for id in ExperimentId::ALL {
                println!("{:<22} {}", id.name(), id.describe());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(v) => {
                for w in &v.warnings {
                    eprintln!("warning: {w}");
                }
                print!("{}", v.config.to_toml());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        },
        Command::Run { config, output } => {
            let v = match load(&config) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            for w in &v.warnings {
                eprintln!("warning: {w}");
            }
            let workers = match worker_count() {
                Ok(n) => n,
                Err(e) => {
                    eprintln!("{e:#} (set {WORKERS_ENV})");
                    return ExitCode::from(2);
                }
            };
            match run_and_write(&v, workers, output.as_deref()) {
                Ok(report) => {
                    print!("{report}");
                    if report.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("run failed: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
