use serde::{Deserialize, Serialize};

use super::{majority_color, AnalysisError};
use crate::process::{ProcessError, StepObserver, Trace, UrnState};

/// Minimum fixation window used by [`default_window`].
pub const MIN_WINDOW: u64 = 500;

/// `max(500, horizon / 4)`, capped at the horizon for short runs.
pub fn default_window(horizon: u64) -> u64 {
    MIN_WINDOW.max(horizon / 4).min(horizon)
}

/// Count gap between the leading color and the runner-up at the horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Margins {
    pub per_urn: Vec<u64>,
    pub pooled: u64,
}

impl Margins {
    pub fn of(state: &UrnState) -> Self {
        Margins {
            per_urn: state.rows().map(gap).collect(),
            pooled: gap(&state.column_totals()),
        }
    }
}

fn gap(counts: &[u64]) -> u64 {
    let mut top = 0;
    let mut second = 0;
    for &c in counts {
        if c > top {
            second = top;
            top = c;
        } else if c > second {
            second = c;
        }
    }
    top - second
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixationReport {
    pub fixated: bool,
    /// The color every urn drew over the final window, when fixated.
    pub color: Option<u8>,
    /// Last step at which some urn drew a color other than the one all
    /// urns drew afterwards; 0 when there was no such step.
    pub last_deviation_step: u64,
    pub window: u64,
    pub horizon: u64,
    pub margin: Margins,
}

/// Single-pass fixation detector.
#[derive(Debug, Clone, Default)]
pub struct FixationTracker {
    steps: u64,
    /// First step of the current stretch where every urn drew `run_color`.
    run_start: u64,
    run_color: Option<u8>,
}

impl FixationTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, n: u64, colors: &[u8]) {
        debug_assert_eq!(n, self.steps);
        let first = colors[0];
        let unanimous = colors.iter().all(|&c| c == first);
        match (unanimous, self.run_color) {
            (true, Some(c)) if c == first => {}
            (true, _) => {
                self.run_color = Some(first);
                self.run_start = n;
            }
            (false, _) => {
                self.run_color = None;
                self.run_start = n + 1;
            }
        }
        self.steps = n + 1;
    }

    pub fn finish(&self, window: u64, final_state: &UrnState) -> Result<FixationReport, AnalysisError> {
        if window == 0 || window > self.steps {
            return Err(AnalysisError::InvalidWindow {
                window,
                horizon: self.steps,
            });
        }
        let clean = match self.run_color {
            Some(_) => self.steps - self.run_start,
            None => 0,
        };
        let fixated = clean >= window;
        Ok(FixationReport {
            fixated,
            color: self.run_color.filter(|_| fixated),
            last_deviation_step: self.run_start.saturating_sub(1),
            window,
            horizon: self.steps,
            margin: Margins::of(final_state),
        })
    }
}

impl StepObserver for FixationTracker {
    fn on_step(&mut self, n: u64, colors: &[u8], _: &[bool], _: &UrnState) -> Result<(), ProcessError> {
        self.observe(n, colors);
        Ok(())
    }
}

/// Fixated iff every urn drew one and the same color over the final
/// `window` steps.
pub fn detect_fixation(trace: &Trace, window: u64) -> Result<FixationReport, AnalysisError> {
    let mut tracker = FixationTracker::new();
    for n in 0..trace.horizon() {
        tracker.observe(n, trace.step_colors(n));
    }
    tracker.finish(window, trace.final_state())
}

/// Winning color of a fixated run or, failing that, the pooled majority.
pub fn leading_color(report: &FixationReport, state: &UrnState) -> usize {
    report
        .color
        .map(usize::from)
        .unwrap_or_else(|| majority_color(state, None))
}
