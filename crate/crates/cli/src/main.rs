//! `timebin`: simulate and analyze time-bin entangled photon pairs from a
//! pulsed quantum-dot cascade.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration/usage error,
//! 3 input-file format error, 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use timebin_cli::commands;
use timebin_cli::config::ExperimentConfig;
use timebin_cli::error::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "timebin",
    version,
    about = "Simulator and analyzer for time-bin entangled photon pairs",
    after_help = "Exit codes: 0 success, 1 I/O failure, 2 configuration error, \
                  3 input-format error, 4 numerical failure."
)]
struct Cli {
    /// Flat key-value configuration file; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Root seed for all random streams (overrides the config).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Worker threads; 0 uses the runtime default. Results are identical
    /// for every thread count.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Excitation probability vs pulse area -> rabi.csv
    Rabi,
    /// Two-pulse interference vs delay -> ramsey.csv
    Ramsey,
    /// pi/2 - pi - pi/2 refocusing scan vs delay -> echo.csv
    Echo,
    /// Sample pump periods and detector tags -> side1/side2/sync .ttb1
    Entangle,
    /// Histogram coincidences from recorded tag streams -> histogram.json
    Analyze {
        /// Side-1 tag stream (binary).
        side1: PathBuf,
        /// Side-2 tag stream (binary).
        side2: PathBuf,
        /// Sync tag stream (binary).
        sync: PathBuf,
        /// Additionally re-run the pipeline at N analyzer-1 phases over
        /// [0, 2pi) and emit fringe.csv.
        #[arg(long, value_name = "N")]
        fringe_points: Option<usize>,
    },
    /// Reconstruct the pair state from tomography counts -> JSON reports
    Tomo {
        /// JSON count records to fit; simulated from the config when omitted.
        counts: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let start = Instant::now();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| {
                CliError::Config(format!("cannot configure {} threads: {e}", cli.threads))
            })?;
    }
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(CliError::io(format!("cannot create output dir {}", cli.out.display())))?;

    match cli.command {
        Command::Rabi => commands::rabi::run(&cfg, &cli.out, start),
        Command::Ramsey => commands::scans::run_ramsey(&cfg, &cli.out, start),
        Command::Echo => commands::scans::run_echo(&cfg, &cli.out, start),
        Command::Entangle => commands::entangle::run(&cfg, &cli.out, start),
        Command::Analyze { side1, side2, sync, fringe_points } => {
            commands::analyze::run(&cfg, &cli.out, &side1, &side2, &sync, fringe_points, start)
        }
        Command::Tomo { counts } => {
            commands::tomo::run(&cfg, &cli.out, counts.as_deref(), start)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
