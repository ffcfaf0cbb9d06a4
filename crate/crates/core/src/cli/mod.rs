//! Command-line harness: `run`, `verify`, `theta` and `report`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or
//! arguments, 3 verification found violations.

pub mod artifact;
pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use config::ExperimentConfig;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VIOLATIONS: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "epoch-active", version, about = "Active multiclass classification in epochs: experiments and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (defaults to the config's `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base seed; overrides `learner.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the learner and the passive baseline over the sweep.
    Run(Common),
    /// Check the assumption and the transfer bound on the instance.
    Verify(Common),
    /// Estimate the disagreement coefficient over a grid.
    Theta {
        #[command(flatten)]
        common: Common,
        /// Comma-separated gamma grid (overrides `theta.gammas`).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        gammas: Option<Vec<f64>>,
        /// Comma-separated epsilon grid (overrides `theta.epsilons`).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        epsilons: Option<Vec<f64>>,
    },
    /// Aggregate results.csv into report.csv and a rate fit.
    Report {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("EPOCH_ACTIVE_LOG", "error");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf, u64), Error> {
    let cfg = ExperimentConfig::load(&common.config)?;
    let out = commands::output_dir(Some(&cfg), common.out.clone());
    let seed = common.seed.unwrap_or(cfg.learner.seed);
    Ok((cfg, out, seed))
}

fn dispatch(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Run(c) => {
            let (cfg, out, seed) = load(&c)?;
            commands::cmd_run(&cfg, &out, seed, c.jobs)
        }
        Command::Verify(c) => {
            let (cfg, out, seed) = load(&c)?;
            let code = commands::cmd_verify(&cfg, &out, seed)?;
            Ok(if code == 0 { 0 } else { EXIT_VIOLATIONS })
        }
        Command::Theta { common, gammas, epsilons } => {
            let (cfg, out, seed) = load(&common)?;
            let g = gammas.unwrap_or_else(|| cfg.theta.gammas.clone());
            let e = epsilons.unwrap_or_else(|| cfg.theta.epsilons.clone());
            commands::cmd_theta(&cfg, &out, seed, &g, &e)
        }
        Command::Report { config, out } => {
            let cfg = config.as_deref().map(ExperimentConfig::load).transpose()?;
            commands::cmd_report(&commands::output_dir(cfg.as_ref(), out))
        }
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
