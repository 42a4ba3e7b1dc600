use serde::{Deserialize, Serialize};

use super::{check_ce, limiting_proportion, AnalysisError};
use crate::process::{ProcessError, StepObserver, Trace, UrnState};

/// Default share of the horizon inside which `n0` must fall.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;

/// Verdict on whether a two-color run settled into the conformist /
/// nonconformist pattern: from `n0` on, each urn either always draws
/// `color_d`, or draws `color_d` exactly on its shared steps and the other
/// color on its solo steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuitabilityReport {
    pub resolved: bool,
    pub color_d: u8,
    pub n0: u64,
    pub conformists: Vec<usize>,
    pub nonconformists: Vec<usize>,
    pub n_c: usize,
    pub n_nc: usize,
    pub ce_satisfied: bool,
    pub predicted_share: f64,
    /// Share of `color_d` over all balls at the horizon.
    pub observed_share: f64,
}

/// Single-pass classifier. For each candidate color and urn it remembers
/// the last step that broke either pattern.
#[derive(Debug, Clone)]
pub struct SuitabilityTracker {
    urns: usize,
    steps: u64,
    // [candidate][urn]: last violating step + 1, 0 when never violated.
    conformist_break: [Vec<u64>; 2],
    nonconformist_break: [Vec<u64>; 2],
}

impl SuitabilityTracker {
    pub fn new(urns: usize) -> Self {
        SuitabilityTracker {
            urns,
            steps: 0,
            conformist_break: [vec![0; urns], vec![0; urns]],
            nonconformist_break: [vec![0; urns], vec![0; urns]],
        }
    }

    pub fn observe(&mut self, n: u64, colors: &[u8], env: &[bool]) {
        debug_assert_eq!(n, self.steps);
        for u in 0..self.urns {
            for d in 0..2u8 {
                let hit = colors[u] == d;
                if !hit {
                    self.conformist_break[d as usize][u] = n + 1;
                }
                // Nonconformist: d on shared steps, the other color on solo steps.
                if hit != env[u] {
                    self.nonconformist_break[d as usize][u] = n + 1;
                }
            }
        }
        self.steps = n + 1;
    }

    /// Minimal `n0` for candidate `d`, and which urns are conformist there.
    fn candidate(&self, d: usize) -> (u64, Vec<bool>) {
        let n0 = (0..self.urns)
            .map(|u| self.conformist_break[d][u].min(self.nonconformist_break[d][u]))
            .max()
            .unwrap_or(0);
        // Urns fitting both patterns (no solo step since n0) count as conformist.
        let conformist = (0..self.urns).map(|u| self.conformist_break[d][u] <= n0).collect();
        (n0, conformist)
    }

    pub fn finish(
        &self,
        p: f64,
        tail_fraction: f64,
        final_state: &UrnState,
    ) -> Result<SuitabilityReport, AnalysisError> {
        if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
            return Err(AnalysisError::InvalidTailFraction(tail_fraction));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(AnalysisError::InvalidProbability(p));
        }
        let (n0_black, conf_black) = self.candidate(0);
        let (n0_white, conf_white) = self.candidate(1);
        let nnc = |c: &[bool]| c.iter().filter(|&&x| !x).count();
        let pick_white = n0_white < n0_black
            || (n0_white == n0_black && nnc(&conf_white) < nnc(&conf_black));
        let (color_d, n0, conformist) = if pick_white {
            (1u8, n0_white, conf_white)
        } else {
            (0u8, n0_black, conf_black)
        };

        let latest = (tail_fraction * self.steps as f64).floor() as u64;
        let resolved = self.steps > 0 && n0 < self.steps && n0 <= latest;
        let conformists: Vec<usize> = (0..self.urns).filter(|&u| conformist[u]).collect();
        let nonconformists: Vec<usize> = (0..self.urns).filter(|&u| !conformist[u]).collect();
        let n_nc = nonconformists.len();
        let totals = final_state.column_totals();
        let all: u64 = totals.iter().sum();
        Ok(SuitabilityReport {
            resolved,
            color_d,
            n0,
            n_c: conformists.len(),
            n_nc,
            conformists,
            nonconformists,
            ce_satisfied: check_ce(p, self.urns, n_nc),
            predicted_share: limiting_proportion(p, self.urns, n_nc),
            observed_share: if all == 0 {
                0.0
            } else {
                totals[color_d as usize] as f64 / all as f64
            },
        })
    }
}

impl StepObserver for SuitabilityTracker {
    fn on_step(&mut self, n: u64, colors: &[u8], env: &[bool], _: &UrnState) -> Result<(), ProcessError> {
        self.observe(n, colors, env);
        Ok(())
    }
}

/// Find the earliest `n0` from which the trace follows the
/// conformist/nonconformist pattern. Two colors only.
pub fn classify_suitability(
    trace: &Trace,
    p: f64,
    tail_fraction: f64,
) -> Result<SuitabilityReport, AnalysisError> {
    if trace.colors() != 2 {
        return Err(AnalysisError::UnsupportedColors(trace.colors()));
    }
    let mut tracker = SuitabilityTracker::new(trace.urns());
    for n in 0..trace.horizon() {
        tracker.observe(n, trace.step_colors(n), trace.step_env(n));
    }
    tracker.finish(p, tail_fraction, trace.final_state())
}
