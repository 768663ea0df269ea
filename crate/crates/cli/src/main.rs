//! `tban` command-line interface.
//!
//! Subcommands:
//! - `analyze`  — singularity diagnostics of the configured local rule (JSON)
//! - `exact`    — exact boundary influence on the central node (JSON)
//! - `simulate` — sampled estimate of the central activity (JSON)
//! - `sweep`    — parameter sweep, written as CSV
//! - `validate` — structural checks of the configured lattice weights (JSON)
//!
//! Results go to stdout as single-line JSON; the resolved configuration is
//! echoed to stderr for auditability. Exit codes: 0 success;
//! 1 configuration error; 2 numerical failure; 3 size cap exceeded.

mod config;
mod output;

use clap::{Parser, Subcommand};
use serde::Serialize;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use config::{ConfigError, RunConfig};
use tban::lattice::{build_lattice, validate_structure, LatticeWeights};
use tban::markov::{boundary_influence, DEFAULT_MAX_ITER, DEFAULT_TOL};
use tban::montecarlo::{self, simulate, write_sweep_csv, McParams, SimulationPlan};
use tban::projectivity::phase_transition_report;

#[derive(Parser)]
#[command(
    name = "tban",
    version,
    about = "Stochastic threshold networks on 2D lattices: exact analysis, \
             sampling, and phase-transition diagnostics"
)]
struct Cli {
    /// Cap the number of worker threads (default: all available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the singularity diagnostics of the configured local rule.
    Analyze {
        /// Path of the JSON run configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute the exact boundary influence on the central node.
    Exact {
        /// Path of the JSON run configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate the stationary central activity by sampling.
    Simulate {
        /// Path of the JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed from the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sample a parameter sweep and write it as CSV.
    Sweep {
        /// Path of the JSON run configuration (must contain a sweep section).
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the structural hypotheses on the configured lattice weights.
    Validate {
        /// Path of the JSON run configuration.
        #[arg(long)]
        config: PathBuf,
    },
}

enum AppError {
    Config(String),
    Core(tban::Error),
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) => f.write_str(m),
            AppError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<tban::Error> for AppError {
    fn from(e: tban::Error) -> Self {
        AppError::Core(e)
    }
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 1,
            AppError::Core(tban::Error::NonConvergence { .. }) => 2,
            AppError::Core(tban::Error::SizeCapExceeded { .. }) => 3,
            AppError::Core(_) => 1,
        }
    }
}

#[derive(Serialize)]
struct SweepSummary {
    rows: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version arrive here too; they print to stdout
            // and succeed, while genuine usage mistakes are config errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(1);
        }
        // A pool may already exist (e.g. in-process tests); the cap is
        // advisory in that case.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Loads the configuration and echoes the resolved form (defaults filled
/// in) to stderr so every run is auditable.
fn load_and_echo(path: &Path) -> Result<RunConfig, AppError> {
    let cfg = config::load(path)?;
    eprintln!("{}", output::to_json_string(&cfg.resolved()));
    Ok(cfg)
}

fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::Analyze { config } => {
            let cfg = load_and_echo(&config)?;
            let report = phase_transition_report(&cfg.potentials);
            println!("{}", output::to_json_string(&report));
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_and_echo(&config)?;
            let topology = build_lattice(cfg.width, cfg.height)?;
            let weights =
                LatticeWeights::isotropic(&topology, cfg.potentials.w(0), cfg.potentials.w(1));
            let report = validate_structure(&weights, &topology);
            println!("{}", output::to_json_string(&report));
            Ok(())
        }
        Command::Exact { config } => {
            let cfg = load_and_echo(&config)?;
            let topology = build_lattice(cfg.width, cfg.height)?;
            let result = boundary_influence(
                &topology,
                &cfg.potentials,
                cfg.mode,
                DEFAULT_TOL,
                DEFAULT_MAX_ITER,
            )?;
            println!("{}", output::to_json_string(&result));
            Ok(())
        }
        Command::Simulate { config, seed } => {
            let mut cfg = config::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            eprintln!("{}", output::to_json_string(&cfg.resolved()));
            let topology = build_lattice(cfg.width, cfg.height)?;
            let plan = SimulationPlan {
                topology: &topology,
                potentials: cfg.potentials,
                boundary: cfg.boundary,
                mode: cfg.mode,
                burn_in: cfg.burn_in,
                samples: cfg.samples,
                thinning: cfg.thinning,
                seed: cfg.seed,
            };
            let out = simulate(&plan)?;
            println!("{}", output::to_json_string(&out.estimate));
            Ok(())
        }
        Command::Sweep { config, out } => {
            let cfg = load_and_echo(&config)?;
            let spec = cfg.sweep.ok_or_else(|| {
                AppError::Config(
                    "missing required field sweep (the sweep subcommand needs a sweep section)"
                        .into(),
                )
            })?;
            let topology = build_lattice(cfg.width, cfg.height)?;
            let params = McParams {
                burn_in: cfg.burn_in,
                samples: cfg.samples,
                thinning: cfg.thinning,
                seed: cfg.seed,
            };
            let rows = montecarlo::sweep(&topology, &cfg.potentials, cfg.mode, &params, &spec)?;
            let file = File::create(&out)
                .map_err(|e| AppError::Config(format!("cannot write {}: {e}", out.display())))?;
            let mut writer = BufWriter::new(file);
            write_sweep_csv(&rows, &mut writer)
                .and_then(|()| writer.flush())
                .map_err(|e| AppError::Config(format!("cannot write {}: {e}", out.display())))?;
            println!("{}", output::to_json_string(&SweepSummary { rows: rows.len() }));
            Ok(())
        }
    }
}
