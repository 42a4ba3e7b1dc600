//! Verdicts on finished runs plus the closed-form quantities they are
//! compared against.
//!
//! Everything here is certified only up to the horizon: fixation means a
//! clean final window, suitability means a clean suffix starting early
//! enough. Reports carry count margins so callers can judge how decisive a
//! verdict is.

mod fixation;
mod suitability;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::process::{ProcessError, StepObserver, Trace, UrnState};

pub use fixation::{default_window, detect_fixation, leading_color, FixationReport, FixationTracker, Margins, MIN_WINDOW};
pub use suitability::{classify_suitability, SuitabilityReport, SuitabilityTracker, DEFAULT_TAIL_FRACTION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("window {window} must be in 1..={horizon}")]
    InvalidWindow { window: u64, horizon: u64 },
    #[error("tail fraction must lie in (0, 1], got {0}")]
    InvalidTailFraction(f64),
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("suitability is defined for two colors, trace has {0}")]
    UnsupportedColors(usize),
}

/// Color with the most balls in urn `urn`, or over all urns when `None`.
/// Ties go to the lowest color index.
pub fn majority_color(state: &UrnState, urn: Option<usize>) -> usize {
    match urn {
        Some(u) => argmax_lowest(state.row(u)),
        None => argmax_lowest(&state.column_totals()),
    }
}

fn argmax_lowest(counts: &[u64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Conformism equation `(1 - p) * n_nc < urns / 2`.
pub fn check_ce(p: f64, urns: usize, n_nc: usize) -> bool {
    (1.0 - p) * (n_nc as f64) < urns as f64 / 2.0
}

/// Largest number of nonconformist urns compatible with the conformism
/// equation; none at all once `p >= 1/2`.
pub fn phase_max_nonconformists(p: f64, urns: usize) -> usize {
    if p >= 0.5 {
        return 0;
    }
    (0..=urns).rev().find(|&i| check_ce(p, urns, i)).unwrap_or(0)
}

/// Limiting share of the common color with `n_nc` nonconformist urns.
pub fn limiting_proportion(p: f64, urns: usize, n_nc: usize) -> f64 {
    1.0 - (1.0 - p) * n_nc as f64 / urns as f64
}

/// Self-consistent limiting draw frequencies `(alpha_1, alpha_2)` of the
/// black color for two urns with exponential weights.
pub fn heuristic_fixed_points(p: f64) -> Vec<(f64, f64)> {
    let mut points = vec![(0.0, 0.0), (1.0, 1.0)];
    if p < 0.5 {
        points.extend([(p, 1.0), (1.0, p), (0.0, 1.0 - p), (1.0 - p, 0.0)]);
    }
    points
}

/// Symmetry class of a fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointClass {
    /// `(0, 0)` or `(1, 1)`: both urns settle on the same color.
    Consensus,
    /// `(p, 1)` or `(1, p)`: the reference color is common, one urn dissents.
    ReferenceCommon,
    /// `(0, 1 - p)` or `(1 - p, 0)`: the other color is common, one urn dissents.
    OtherCommon,
}

impl FixedPointClass {
    pub fn of(point: (f64, f64)) -> Self {
        let (a, b) = point;
        if a == b {
            FixedPointClass::Consensus
        } else if a == 1.0 || b == 1.0 {
            FixedPointClass::ReferenceCommon
        } else {
            FixedPointClass::OtherCommon
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearestFixedPoint {
    pub point: (f64, f64),
    pub class: FixedPointClass,
    /// Max-norm distance.
    pub distance: f64,
}

/// Fraction of steps each urn drew `reference_color`.
pub fn empirical_alphas(trace: &Trace, reference_color: usize) -> Vec<f64> {
    alphas_of(trace.final_state(), reference_color)
}

/// Same as [`empirical_alphas`], read off the counts at the horizon.
pub fn alphas_of(state: &UrnState, reference_color: usize) -> Vec<f64> {
    let n = state.n().max(1) as f64;
    state.rows().map(|r| r[reference_color] as f64 / n).collect()
}

/// Closest heuristic fixed point under the max norm. Only meaningful for two
/// urns; runs sitting near the unstable `alpha = 1/2` lines simply come out
/// far from every point.
pub fn nearest_fixed_point(alphas: (f64, f64), p: f64) -> NearestFixedPoint {
    heuristic_fixed_points(p)
        .into_iter()
        .map(|pt| {
            let distance = (alphas.0 - pt.0).abs().max((alphas.1 - pt.1).abs());
            NearestFixedPoint {
                point: pt,
                class: FixedPointClass::of(pt),
                distance,
            }
        })
        .min_by(|a, b| a.distance.total_cmp(&b.distance))
        .expect("at least two fixed points")
}

/// Runs both detectors over a live or replayed run.
#[derive(Debug, Clone)]
pub struct RunAnalyzer {
    pub fixation: FixationTracker,
    pub suitability: Option<SuitabilityTracker>,
}

impl RunAnalyzer {
    pub fn new(urns: usize, colors: usize) -> Self {
        RunAnalyzer {
            fixation: FixationTracker::new(),
            suitability: (colors == 2).then(|| SuitabilityTracker::new(urns)),
        }
    }
}

impl StepObserver for RunAnalyzer {
    fn on_step(&mut self, n: u64, colors: &[u8], env: &[bool], _: &UrnState) -> Result<(), ProcessError> {
        self.fixation.observe(n, colors);
        if let Some(s) = self.suitability.as_mut() {
            s.observe(n, colors, env);
        }
        Ok(())
    }
}
