use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oseen_cli::{load, run, RunError, Summary};

/// Exit status for configuration errors; partial failures exit with 1.
const INVALID: u8 = 2;

#[derive(Parser)]
#[command(name = "oseen", version, about = "Exterior Oseen flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiments of a configuration file.
    Run {
        /// JSON run configuration.
        config: PathBuf,
        /// Override the worker count of the configuration.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check a configuration without running it.
    Validate {
        /// JSON run configuration.
        config: PathBuf,
    },
    /// Print the summary of a finished run.
    Report {
        /// Output directory of a previous run.
        run_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config, workers } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(v) => return report_violations(&v),
            };
            if let Some(w) = workers {
                cfg.workers = w;
            }
            match run(&cfg) {
                Ok(outcome) => {
                    print!("{}", outcome.summary.render());
                    println!("artifacts in {}", outcome.output.display());
                    if outcome.summary.all_pass() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(RunError::Invalid(v)) => report_violations(&v),
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Validate { config } => {
            let violations = match load(&config) {
                Ok(c) => c.violations(),
                Err(v) => v,
            };
            let report = serde_json::json!({ "valid": violations.is_empty(), "violations": violations });
            println!("{}", serde_json::to_string_pretty(&report).expect("violations serialize"));
            if violations.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(INVALID)
            }
        }
        Command::Report { run_dir } => match Summary::read(&run_dir) {
            Ok(s) => {
                print!("{}", s.render());
                if s.all_pass() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::FAILURE
                }
            }
            Err(e) => {
                eprintln!("cannot read summary in {}: {e}", run_dir.display());
                ExitCode::from(INVALID)
            }
        },
    }
}

fn report_violations(v: &[oseen_cli::Violation]) -> ExitCode {
    for x in v {
        eprintln!("{x}");
    }
    ExitCode::from(INVALID)
}
