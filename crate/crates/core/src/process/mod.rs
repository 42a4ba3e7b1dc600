//! The interacting urn mechanism: state, environments, the synchronous
//! transition, full runs and an exact enumeration oracle.

mod engine;
mod environment;
mod oracle;
mod random;
mod state;
mod trace;

use thiserror::Error;

pub use engine::{
    run, run_observed, select_color, step, step_with, urn_probabilities, EngineKind, RunConfig,
    DEFAULT_MEMORY_BUDGET, MAX_HORIZON,
};
pub use environment::{sample_environment, Environment, EnvironmentFile, EnvironmentMode, IndicatorMatrix};
pub use oracle::{enumerate_exact, enumerate_exact_guarded, path_count, PathLaw, DEFAULT_PATH_GUARD};
pub use random::{Purpose, RandomSource, StreamReader};
pub use state::UrnState;
pub use trace::{
    read_trace_jsonl, replay_jsonl, Fanout, JsonlTraceWriter, RunMeta, StepObserver, Trace, TraceRecorder,
};

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("at least one urn is required")]
    NoUrns,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("horizon {0} exceeds the supported maximum of 2^31 steps")]
    HorizonTooLong(u64),
    #[error("at least two colors are required, got {0}")]
    TooFewColors(usize),
    #[error("at most 256 colors are supported, got {0}")]
    TooManyColors(usize),
    #[error("the two-color engine cannot run {0} colors")]
    EngineMismatch(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("urn {urn} holds {total} balls at time {n}")]
    Conservation { urn: usize, total: u64, n: u64 },
    #[error("trace needs {needed} bytes, over the {budget}-byte budget; stream the run instead")]
    TraceTooLarge { needed: usize, budget: usize },
    #[error("instance with {urns} urns, {colors} colors and {steps} steps exceeds the {limit}-path guard")]
    OracleGuard {
        urns: usize,
        colors: usize,
        steps: u32,
        limit: u64,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
