//! `majority`: command-line front end for the `majority` crate.
//!
//! Every subcommand writes CSV to `--out` and a JSON run manifest next to it.
//! Parameters resolve as flags over `--config` over built-in defaults.

mod commands;
mod manifest;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use params::{
    CltCheckFlags, KernelsFlags, LowerBoundFlags, PredictFlags, SimulateFlags, ThresholdFlags, UpperBoundFlags,
};

#[derive(Parser)]
#[command(name = "majority", version, about = "Majority dynamics and dynamic-cavity computations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Output CSV path; the manifest goes to `<stem>.manifest.json`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON file of parameters (a flat object, or a previous run manifest).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads [default: all cores]. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Correlation and response kernels of the cavity process.
    Kernels(KernelsFlags),
    /// One run of majority dynamics on a random regular graph or a tree.
    Simulate(SimulateFlags),
    /// Empirical consensus threshold on random regular graphs.
    Threshold(ThresholdFlags),
    /// Biased-regime prediction next to a tree simulation.
    Predict(PredictFlags),
    /// Alternating-core lower bound on the threshold.
    LowerBound(LowerBoundFlags),
    /// Bootstrap-percolation upper bound on the threshold.
    UpperBound(UpperBoundFlags),
    /// Exact lattice sums against their Gaussian approximation.
    CltCheck(CltCheckFlags),
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] majority::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Lib(e) => match e.class() {
                majority::ErrorClass::Usage => 1,
                majority::ErrorClass::Numerical => 2,
                majority::ErrorClass::ResourceCap => 3,
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let common = match &command {
        Command::Kernels(f) => f.common.clone(),
        Command::Simulate(f) => f.common.clone(),
        Command::Threshold(f) => f.common.clone(),
        Command::Predict(f) => f.common.clone(),
        Command::LowerBound(f) => f.common.clone(),
        Command::UpperBound(f) => f.common.clone(),
        Command::CltCheck(f) => f.common.clone(),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let config = params::load_config(common.config.as_deref())?;
    match command {
        Command::Kernels(f) => commands::kernels(&common, params::resolve(&config, &f)?),
        Command::Simulate(f) => commands::simulate(&common, params::resolve(&config, &f)?),
        Command::Threshold(f) => commands::threshold(&common, params::resolve(&config, &f)?),
        Command::Predict(f) => commands::predict(&common, params::resolve(&config, &f)?),
        Command::LowerBound(f) => commands::lower_bound(&common, params::resolve(&config, &f)?),
        Command::UpperBound(f) => commands::upper_bound(&common, params::resolve(&config, &f)?),
        Command::CltCheck(f) => commands::clt_check(&common, params::resolve(&config, &f)?),
    }
}
