//! Batch experiment driver: build systems and perturbations from a config
//! file, run simulations and analyses, emit machine-readable reports.
//!
//! Exit codes: 0 success/pass, 1 usage or config error, 2 numerical failure,
//! 3 acceptance-threshold failure.

mod commands;
mod config;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use config::{load_config, CliError, Thresholds};

#[derive(Parser)]
#[command(
    name = "orbistab",
    version,
    about = "Stabilize or destabilize periodic orbits of 3D conservative systems and verify the predicted behavior"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized sampling (recorded in reports).
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads for sweep rows.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Threshold overrides, e.g. --threshold closure=1e-7
    /// (keys: closure, multiplier_match, identity).
    #[arg(long = "threshold", value_name = "KEY=VALUE")]
    thresholds: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured run and write the trajectory CSV.
    Simulate(CommonArgs),
    /// Find the orbit, compare computed and predicted Floquet multipliers.
    Floquet(CommonArgs),
    /// Run a grid of experiments and write one CSV row per run.
    Sweep(CommonArgs),
    /// Sample pointwise identities and report the worst violations.
    Check(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a) | Command::Floquet(a) | Command::Sweep(a) | Command::Check(a) => a,
        }
    }
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| CliError::Usage(format!("cannot write stdout: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = cli.command.common();
    let config = load_config(&common.config)?;
    let thresholds: Thresholds = config.thresholds.apply_overrides(&common.thresholds)?;

    match &cli.command {
        Command::Simulate(a) => {
            let csv = commands::cmd_simulate(&config, &thresholds)?;
            write_output(&a.out, &csv)
        }
        Command::Floquet(a) => {
            let (json, passed) = commands::cmd_floquet(&config, &thresholds, a.seed)?;
            write_output(&a.out, &format!("{json}\n"))?;
            if passed {
                Ok(())
            } else {
                Err(CliError::Threshold("floquet criteria not met (see report)".into()))
            }
        }
        Command::Sweep(a) => {
            let csv = commands::cmd_sweep(&config, &thresholds, a.workers)?;
            write_output(&a.out, &csv)
        }
        Command::Check(a) => {
            let (json, passed) = commands::cmd_check(&config, &thresholds, a.seed)?;
            write_output(&a.out, &format!("{json}\n"))?;
            if passed {
                Ok(())
            } else {
                Err(CliError::Threshold("pointwise identity violations above threshold".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are success; anything else is a usage error
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
