//! Command line front end: runs, sweeps and post-processing of run
//! directories.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad config, bad arguments or unreadable input files.
    #[error("{0}")]
    Input(String),
    /// The simulation itself failed.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "viscobubble", version, about = "Spherical bubble in a compressible viscous liquid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one configuration and write timeseries, snapshots, history and summary.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit `Q ~ A (1 + t)^slope` to a timeseries and record it in summary.json.
    DecayFit {
        csv: PathBuf,
        /// Fit window `lo,hi`.
        #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
        window: (f64, f64),
        /// Summary to update; defaults to summary.json next to the CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Compare a run's boundary density with the Duhamel solution.
    OracleCheck { dir: PathBuf },
    /// Domain truncation and grid refinement studies.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [lo, hi] => {
            let lo: f64 = lo.parse().map_err(|_| format!("`{lo}` is not a number"))?;
            let hi: f64 = hi.parse().map_err(|_| format!("`{hi}` is not a number"))?;
            Ok((lo, hi))
        }
        _ => Err(format!("expected `lo,hi`, found `{s}`")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { config, out } => output::cmd_run(&config, out.as_deref()),
        Command::DecayFit { csv, window, summary } => output::cmd_decay_fit(&csv, window, summary.as_deref()),
        Command::OracleCheck { dir } => output::cmd_oracle_check(&dir),
        Command::Sweep { config, out } => output::cmd_sweep(&config, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
