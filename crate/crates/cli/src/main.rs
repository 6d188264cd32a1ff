//! `rdopt`: config-driven surrogate optimization, tolerance analysis and
//! capacitor field simulation.

mod commands;
mod config;
mod oracle;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use crate::config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(rdopt::Error),
    Io(std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use rdopt::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::InvalidArgument(_) | E::Format(_)) => 2,
            CliError::Core(E::Extrapolation { .. }) => 4,
            CliError::Core(_) | CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<rdopt::Error> for CliError {
    fn from(e: rdopt::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Parser)]
#[command(name = "rdopt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Bayesian optimization of the oracle's target function.
    Optimize,
    /// Monte Carlo tolerance analysis on trained surrogates.
    Robustness,
    /// Optimization of the median performance over the distribution mean.
    RobustOptimize,
    /// Comparison of surrogate predictions with the oracle.
    Verify,
    /// Analytic and finite-volume capacitor fields and bias sweep.
    Capacitor,
    /// Evaluates the synthetic cavity model.
    ToyEval,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli.config.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = cli.out {
        cfg.output_dir = Some(o);
    }
    cfg.validate()?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let out = commands::Artifacts::new(&dir, &cfg)?;
    match cli.command {
        Command::Optimize => commands::optimize_cmd(&cfg, &out),
        Command::Robustness => commands::robustness_cmd(&cfg, &out),
        Command::RobustOptimize => commands::robust_optimize_cmd(&cfg, &out),
        Command::Verify => commands::verify_cmd(&cfg, &out),
        Command::Capacitor => commands::capacitor_cmd(&cfg, &out),
        Command::ToyEval => commands::toy_eval_cmd(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
