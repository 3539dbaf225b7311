//! Command-line interface: configuration parsing, run orchestration, seed
//! sweeps, metric persistence, and the check/compare subcommands.
//!
//! Subcommands: `run`, `sweep`, `check`, `compare`, `constants`. Exit codes:
//! 0 success, 2 configuration error, 3 divergence or solver failure, 4 failed
//! checks. Log verbosity comes from the `SCB2O_LOG` environment variable
//! (error|warn|info|debug|trace).

pub mod archive;
pub mod checks;
pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;
use commands::OutputFormat;

/// Environment variable selecting log verbosity.
pub const LOG_ENV: &str = "SCB2O_LOG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "scb2o",
    version,
    about = "Soft-quantile consensus-based bi-level optimization runner"
)]
struct Cli {
    /// Worker threads (overrides the config's `workers`).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute one run and archive config snapshot, metrics, and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output archive directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override any config key (`--set key=value`, repeatable).
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Run a parameter grid × seed list; one archive per cell plus an
    /// aggregate table.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Grid spec `parameter=v1,v2,...` (xi, beta, n_particles, or seed).
        #[arg(long)]
        sweep: String,
        /// Explicit seed list `s1,s2,...`; omitted seeds derive from the base
        /// seed and cell index.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Run diagnostics checks against a fresh config or a stored archive.
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        archive: Option<PathBuf>,
        /// Comma-separated check list.
        #[arg(long)]
        checks: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Side-by-side final-metric comparison of methods on one benchmark.
    Compare {
        #[arg(long)]
        benchmark: String,
        /// Comma-separated subset of scb2o,cb2o,sbgd1,vpbgd1.
        #[arg(long)]
        methods: String,
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the closed-form theory constants for a config.
    Constants {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long)]
        b4d: Option<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) => 2,
        Error::Divergence { .. } | Error::Solver { .. } => 3,
        _ => 1,
    }
}

/// Run `f` inside a rayon pool of the requested size. Results are identical
/// at any worker count; the pool only affects throughput.
fn run_in_pool<F: FnOnce() -> i32 + Send>(workers: usize, f: F) -> i32 {
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            eprintln!("error: cannot build worker pool: {e}");
            1
        }
    }
}

fn with_seed_override(set: &[String], seed: Option<u64>) -> Vec<String> {
    let mut out = set.to_vec();
    if let Some(s) = seed {
        out.push(format!("seed={s}"));
    }
    out
}

/// Parse arguments, dispatch, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Clap routes --help/--version through this path with status 0.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };

    let requested_workers = cli.workers;
    let config_workers = |path: &PathBuf, set: &[String]| -> usize {
        config::load(path, set).map(|c| c.workers).unwrap_or(1)
    };

    match cli.command {
        Command::Run { config, out, seed, set } => {
            let set = with_seed_override(&set, seed);
            let workers = requested_workers.unwrap_or_else(|| config_workers(&config, &set));
            run_in_pool(workers, move || match commands::cmd_run(&config, &set, &out) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            })
        }
        Command::Sweep { config, sweep, seeds, out, set } => {
            let workers = requested_workers.unwrap_or_else(|| config_workers(&config, &set));
            run_in_pool(workers, move || {
                match commands::cmd_sweep(&config, &set, &sweep, seeds.as_deref(), &out) {
                    Ok(true) => 0,
                    Ok(false) => 1,
                    Err(e) => {
                        eprintln!("error: {e}");
                        exit_code(&e)
                    }
                }
            })
        }
        Command::Check { config, archive, checks, out, set, seed } => {
            let set = with_seed_override(&set, seed);
            let workers = requested_workers
                .or_else(|| config.as_ref().map(|c| config_workers(c, &set)))
                .unwrap_or(1);
            run_in_pool(workers, move || {
                match commands::cmd_check(
                    config.as_deref(),
                    &set,
                    archive.as_deref(),
                    &checks,
                    out.as_deref(),
                ) {
                    Ok(true) => 0,
                    Ok(false) => 4,
                    Err(e) => {
                        eprintln!("error: {e}");
                        exit_code(&e)
                    }
                }
            })
        }
        Command::Compare { benchmark, methods, seeds, out } => {
            let workers = requested_workers.unwrap_or(1);
            run_in_pool(workers, move || {
                match commands::cmd_compare(&benchmark, &methods, seeds.as_deref(), &out) {
                    Ok(()) => 0,
                    Err(e) => {
                        eprintln!("error: {e}");
                        exit_code(&e)
                    }
                }
            })
        }
        Command::Constants { config, set, b4d, format } => {
            match commands::cmd_constants(&config, &set, b4d, format.into()) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code(&e)
                }
            }
        }
    }
}
