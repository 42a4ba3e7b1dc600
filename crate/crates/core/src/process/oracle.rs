//! Exact law of short runs by brute-force enumeration.
//!
//! The shared/solo indicator of each decision is independent of its uniform,
//! so in the annealed process urn `u` draws color `c` with probability
//! `p * pooled[c] + (1 - p) * solo[c]`, independently of the other urns given
//! the current state.

use std::collections::BTreeMap;

use super::environment::check_probability;
use super::state::UrnState;
use super::{IndicatorMatrix, ProcessError};
use crate::weights::WeightModel;

/// Largest number of paths [`enumerate_exact`] accepts by default.
pub const DEFAULT_PATH_GUARD: u64 = 1_000_000;

/// A path lists the drawn colors step by step, urn by urn
/// (`path[n * urns + u]`).
pub type PathLaw = BTreeMap<Vec<u8>, f64>;

/// Number of paths of an instance, `(colors^urns)^steps`, if it fits in u64.
pub fn path_count(urns: usize, colors: usize, steps: u32) -> Option<u64> {
    let per_step = (colors as u64).checked_pow(u32::try_from(urns).ok()?)?;
    per_step.checked_pow(steps)
}

/// Exact probability of every color path of `steps` steps from the empty
/// state. With `env` the indicators are fixed; otherwise they are mixed out
/// analytically with parameter `p`.
pub fn enumerate_exact(
    model: &WeightModel,
    p: f64,
    urns: usize,
    colors: usize,
    steps: u32,
    env: Option<&IndicatorMatrix>,
) -> Result<PathLaw, ProcessError> {
    enumerate_exact_guarded(model, p, urns, colors, steps, env, DEFAULT_PATH_GUARD)
}

pub fn enumerate_exact_guarded(
    model: &WeightModel,
    p: f64,
    urns: usize,
    colors: usize,
    steps: u32,
    env: Option<&IndicatorMatrix>,
    max_paths: u64,
) -> Result<PathLaw, ProcessError> {
    check_probability(p)?;
    if urns == 0 {
        return Err(ProcessError::NoUrns);
    }
    if steps == 0 {
        return Err(ProcessError::ZeroHorizon);
    }
    if colors < 2 {
        return Err(ProcessError::TooFewColors(colors));
    }
    if colors > u8::MAX as usize + 1 {
        return Err(ProcessError::TooManyColors(colors));
    }
    let paths = path_count(urns, colors, steps);
    if paths.is_none_or(|n| n > max_paths) {
        return Err(ProcessError::OracleGuard {
            urns,
            colors,
            steps,
            limit: max_paths,
        });
    }
    if let Some(m) = env {
        if m.urns() != urns || m.horizon() < u64::from(steps) {
            return Err(ProcessError::Dimension(format!(
                "environment is {}x{}, enumeration needs at least {}x{}",
                m.horizon(),
                m.urns(),
                steps,
                urns
            )));
        }
    }

    let mut law = PathLaw::new();
    let mut path = Vec::with_capacity(steps as usize * urns);
    let ctx = Ctx {
        model,
        p,
        urns,
        colors,
        steps: u64::from(steps),
        env,
    };
    ctx.descend(&UrnState::empty(urns, colors), 1.0, &mut path, &mut law);
    Ok(law)
}

struct Ctx<'a> {
    model: &'a WeightModel,
    p: f64,
    urns: usize,
    colors: usize,
    steps: u64,
    env: Option<&'a IndicatorMatrix>,
}

impl Ctx<'_> {
    /// Per-urn marginal law of the next draw.
    fn marginals(&self, state: &UrnState) -> Vec<Vec<f64>> {
        let pooled = self.model.draw_probabilities(&state.column_totals());
        let n = state.n();
        (0..self.urns)
            .map(|u| {
                let solo = self.model.draw_probabilities(state.row(u));
                match self.env {
                    Some(m) => {
                        if m.is_shared(n, u) {
                            pooled.clone()
                        } else {
                            solo
                        }
                    }
                    None => pooled
                        .iter()
                        .zip(&solo)
                        .map(|(a, b)| self.p * a + (1.0 - self.p) * b)
                        .collect(),
                }
            })
            .collect()
    }

    fn descend(&self, state: &UrnState, prob: f64, path: &mut Vec<u8>, law: &mut PathLaw) {
        if state.n() == self.steps {
            law.insert(path.clone(), prob);
            return;
        }
        let marginals = self.marginals(state);
        let mut choice = vec![0u8; self.urns];
        loop {
            let mut q = prob;
            for (u, &c) in choice.iter().enumerate() {
                q *= marginals[u][c as usize];
            }
            let mut next = state.clone();
            next.apply(&choice);
            path.extend_from_slice(&choice);
            self.descend(&next, q, path, law);
            path.truncate(path.len() - self.urns);

            // Odometer over colors^urns joint choices, last urn fastest.
            let mut u = self.urns;
            loop {
                if u == 0 {
                    return;
                }
                u -= 1;
                choice[u] += 1;
                if (choice[u] as usize) < self.colors {
                    break;
                }
                choice[u] = 0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp2() -> WeightModel {
        WeightModel::exponential(2.0).unwrap()
    }

    #[test]
    fn single_urn_single_step() {
        let law = enumerate_exact(&exp2(), 0.5, 1, 2, 1, None).unwrap();
        assert_eq!(law.len(), 2);
        assert_eq!(law[&vec![0]], 0.5);
        assert_eq!(law[&vec![1]], 0.5);
    }

    #[test]
    fn chain_rule_two_steps() {
        let law = enumerate_exact(&exp2(), 0.3, 1, 2, 2, None).unwrap();
        assert!((law[&vec![0, 0]] - 1.0 / 3.0).abs() < 1e-15);
        assert!((law[&vec![0, 1]] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn normalised() {
        for (u, c, n) in [(2, 2, 3), (1, 3, 4), (3, 2, 2), (2, 3, 2)] {
            let law = enumerate_exact(&exp2(), 0.37, u, c, n, None).unwrap();
            assert_eq!(law.len() as u64, path_count(u, c, n).unwrap());
            let total: f64 = law.values().sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn quenched_uses_fixed_indicators() {
        // Urn 0 always shared, urn 1 always solo.
        let m = IndicatorMatrix::from_rows(vec![vec![true, false]; 2]).unwrap();
        let law = enumerate_exact(&exp2(), 0.5, 2, 2, 2, Some(&m)).unwrap();
        // Step 0: both 1/2. Step 1 after (0, 1): pooled (1,1) -> 1/2; urn 1 solo (0,1) -> white 2/3.
        assert!((law[&vec![0, 1, 0, 1]] - 0.25 * 0.5 * 2.0 / 3.0).abs() < 1e-15);
        let total: f64 = law.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn guard_rejects_large_instances() {
        let err = enumerate_exact(&exp2(), 0.5, 4, 2, 6, None).unwrap_err();
        assert!(matches!(err, ProcessError::OracleGuard { .. }));
        assert!(enumerate_exact(&exp2(), 0.5, 40, 8, 40, None).is_err());
        assert!(enumerate_exact_guarded(&exp2(), 0.5, 2, 2, 3, None, 63).is_err());
        assert!(enumerate_exact_guarded(&exp2(), 0.5, 2, 2, 3, None, 64).is_ok());
        assert!(enumerate_exact(&exp2(), 1.5, 1, 2, 1, None).is_err());
    }
}
