//! `interurn`: simulate, sweep, evaluate closed forms and check the engine
//! against exact enumeration.
//!
//! Exit codes: 0 success, 1 I/O or run failure, 2 invalid input,
//! 3 verification failure.

mod calc;
mod oracle;
mod simulate;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Verify(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Verify(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Verify(m) => f.write_str(m),
        }
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(name = "interurn", version, about = "Strongly reinforced interacting urns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one realisation, writing its trace and analysis report.
    Simulate(SimulateArgs),
    /// Run a replication campaign over a (p, U) grid.
    Sweep(SweepArgs),
    /// Evaluate closed-form quantities.
    Calc(CalcArgs),
    /// Compare simulated path frequencies with exact enumeration.
    OracleCheck(OracleArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON file with any of the flag values; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Exponential weights `rho^i`.
    #[arg(long, conflicts_with = "weights_file")]
    pub rho: Option<f64>,
    /// JSON weight model, e.g. `{"kind": "polynomial", "gamma": 2, "delta": 1}`.
    #[arg(long)]
    pub weights_file: Option<PathBuf>,
    /// Probability that an urn draws from the pooled counts.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub urns: Option<usize>,
    #[arg(long)]
    pub colors: Option<usize>,
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fixed environment file `{"p": .., "indicators": [[0|1, ..], ..]}`.
    #[arg(long)]
    pub quenched_env: Option<PathBuf>,
    #[arg(long)]
    pub snapshot_every: Option<u64>,
    /// Fixation window; defaults to max(500, horizon / 4), capped at the horizon.
    #[arg(long)]
    pub window: Option<u64>,
    #[arg(long)]
    pub tail_fraction: Option<f64>,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Campaign config (JSON).
    pub config: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = default_jobs())]
    pub jobs: usize,
    /// Override the output directory from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
pub struct CalcArgs {
    /// Fixed points of the two-urn system: P.
    #[arg(long, value_name = "P")]
    pub fixed_points: Option<String>,
    /// Largest admissible number of nonconformists: P U.
    #[arg(long, num_args = 2, value_names = ["P", "U"])]
    pub max_nonconformists: Option<Vec<String>>,
    /// Whether N nonconformists satisfy the conformism equation: P U N.
    #[arg(long, num_args = 3, value_names = ["P", "U", "N"])]
    pub ce: Option<Vec<String>>,
    /// Limiting share of the common color: P U N.
    #[arg(long, num_args = 3, value_names = ["P", "U", "N"])]
    pub share: Option<Vec<String>>,
}

#[derive(Args)]
pub struct OracleArgs {
    /// Monte Carlo runs per instance.
    #[arg(long, default_value_t = interurn::oracle_suite::DEFAULT_RUNS)]
    pub runs: u64,
    /// Refuse instances with more paths than this.
    #[arg(long, default_value_t = interurn::process::DEFAULT_PATH_GUARD)]
    pub max_paths: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Check a single instance instead of the default set.
    #[arg(long)]
    pub urns: Option<usize>,
    #[arg(long, requires = "urns")]
    pub colors: Option<usize>,
    #[arg(long, requires = "urns")]
    pub steps: Option<u32>,
    #[arg(long, requires = "urns")]
    pub rho: Option<f64>,
    #[arg(long, requires = "urns")]
    pub p: Option<f64>,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Calc(a) => calc::run(a),
        Command::OracleCheck(a) => oracle::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
