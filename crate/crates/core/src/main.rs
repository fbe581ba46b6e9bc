//! `phi4lab` binary: run experiment suites, dump operators, list experiments.
//!
//! Exit codes: 0 all verdicts passed, 1 some verdict failed, 2 configuration
//! error, 3 resource limit, 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phi4lab::cli::{self, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "phi4lab",
    version,
    about = "Numerical laboratory for a quartic boson interaction on truncated Fock spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments listed in the config and write one report each
    Run(RunArgs),
    /// Write the assembled operators at a fixed time
    Dump(DumpArgs),
    /// List the available experiments
    ListExperiments,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Report directory; overrides `output.directory`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent experiments
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Sample seed; overrides `seed`
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DumpArgs {
    /// Path to the TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Dump directory; overrides `output.directory`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluation time for the interaction (default: window midpoint)
    #[arg(long)]
    time: Option<f64>,
}

fn load(config: &PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> phi4lab::Result<(ExperimentConfig, PathBuf)> {
    let mut config = ExperimentConfig::load(config)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(dir) = &out {
        config.output.directory = dir.display().to_string();
    }
    let dir = out.unwrap_or_else(|| PathBuf::from(&config.output.directory));
    Ok((config, dir))
}

fn dispatch(cli: Cli) -> phi4lab::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let (config, dir) = load(&args.config, args.out, args.seed)?;
            let outcome = cli::run(&config, &dir, args.threads)?;
            for line in &outcome.lines {
                println!("{line}");
            }
            println!(
                "{} experiment(s), reports in {}",
                outcome.lines.len(),
                dir.display()
            );
            Ok(if outcome.all_passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Dump(args) => {
            let (config, dir) = load(&args.config, args.out, None)?;
            let paths = cli::dump(&config, &dir, args.time)?;
            for path in paths {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ListExperiments => {
            print!("{}", cli::list_experiments());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(cli::exit_code(&err))
        }
    }
}
