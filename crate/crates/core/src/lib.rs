//! Simulation and analysis of strongly reinforced interacting urns.
//!
//! Each of `U` urns holds balls of `C` colors. At every step each urn draws a
//! ball either from all urns pooled (with probability `p`) or from itself
//! alone, using weights `w_i` of the current color counts, and gains one ball
//! of the drawn color. For `p >= 1/2` all urns eventually agree on one color;
//! below `1/2` some urns may settle into a nonconformist pattern.

pub mod analysis;
pub mod harness;
pub mod oracle_suite;
pub mod process;
pub mod stats;
pub mod weights;

pub use process::{
    enumerate_exact, run, run_observed, sample_environment, step, Environment, ProcessError, RandomSource,
    RunConfig, Trace, UrnState,
};
pub use weights::{pi_lower_bound, WeightError, WeightModel};
