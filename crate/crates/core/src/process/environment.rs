use serde::{Deserialize, Serialize};

use super::random::{Purpose, RandomSource};
use super::ProcessError;

/// Fixed shared/solo indicators, `horizon` rows of `urns` entries.
/// `true` means the urn draws from all urns pooled at that step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorMatrix {
    horizon: u64,
    urns: usize,
    shared: Vec<bool>,
}

impl IndicatorMatrix {
    pub fn from_rows(rows: Vec<Vec<bool>>) -> Result<Self, ProcessError> {
        let horizon = rows.len() as u64;
        if horizon == 0 {
            return Err(ProcessError::ZeroHorizon);
        }
        let urns = rows[0].len();
        if urns == 0 {
            return Err(ProcessError::NoUrns);
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != urns) {
            return Err(ProcessError::Dimension(format!(
                "indicator row {bad} has {} entries, expected {urns}",
                rows[bad].len()
            )));
        }
        Ok(IndicatorMatrix {
            horizon,
            urns,
            shared: rows.into_iter().flatten().collect(),
        })
    }

    /// Same indicator everywhere.
    pub fn constant(horizon: u64, urns: usize, shared: bool) -> Self {
        IndicatorMatrix {
            horizon,
            urns,
            shared: vec![shared; horizon as usize * urns],
        }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn urns(&self) -> usize {
        self.urns
    }

    pub fn row(&self, n: u64) -> &[bool] {
        let start = n as usize * self.urns;
        &self.shared[start..start + self.urns]
    }

    pub fn is_shared(&self, n: u64, u: usize) -> bool {
        self.shared[n as usize * self.urns + u]
    }

    pub fn shared_fraction(&self) -> f64 {
        self.shared.iter().filter(|&&s| s).count() as f64 / self.shared.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentMode {
    Quenched(IndicatorMatrix),
    /// Indicators drawn lazily as i.i.d. Bernoulli(p) from the run's
    /// random source.
    Annealed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    p: f64,
    mode: EnvironmentMode,
}

pub(crate) fn check_probability(p: f64) -> Result<(), ProcessError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ProcessError::InvalidProbability(p))
    }
}

impl Environment {
    pub fn annealed(p: f64) -> Result<Self, ProcessError> {
        check_probability(p)?;
        Ok(Environment {
            p,
            mode: EnvironmentMode::Annealed,
        })
    }

    /// A fixed environment. `p` is kept for the record only.
    pub fn quenched(p: f64, indicators: IndicatorMatrix) -> Result<Self, ProcessError> {
        check_probability(p)?;
        Ok(Environment {
            p,
            mode: EnvironmentMode::Quenched(indicators),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn mode(&self) -> &EnvironmentMode {
        &self.mode
    }

    pub fn is_quenched(&self) -> bool {
        matches!(self.mode, EnvironmentMode::Quenched(_))
    }

    pub fn indicators(&self) -> Option<&IndicatorMatrix> {
        match &self.mode {
            EnvironmentMode::Quenched(m) => Some(m),
            EnvironmentMode::Annealed => None,
        }
    }
}

/// Shared/solo decision for `(n, u)` of an annealed environment.
pub(crate) fn annealed_indicator(uniform: f64, p: f64) -> bool {
    uniform < p
}

/// Sample a quenched environment: every indicator is independently shared
/// with probability `p`. Uses the same variates a lazily annealed run with
/// the same source would use, so both produce identical runs.
pub fn sample_environment(
    p: f64,
    urns: usize,
    horizon: u64,
    source: &RandomSource,
) -> Result<Environment, ProcessError> {
    check_probability(p)?;
    if urns == 0 {
        return Err(ProcessError::NoUrns);
    }
    if horizon == 0 {
        return Err(ProcessError::ZeroHorizon);
    }
    let mut reader = source.reader(Purpose::Environment);
    let mut row = vec![0.0; urns];
    let mut shared = Vec::with_capacity(horizon as usize * urns);
    for n in 0..horizon {
        reader.fill_row(n, &mut row);
        shared.extend(row.iter().map(|&v| annealed_indicator(v, p)));
    }
    Environment::quenched(
        p,
        IndicatorMatrix {
            horizon,
            urns,
            shared,
        },
    )
}

/// On-disk form of a quenched environment:
/// `{"p": 0.5, "indicators": [[0, 1], [1, 1], ...]}` with 1 = shared.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentFile {
    pub p: f64,
    pub indicators: Vec<Vec<u8>>,
}

impl TryFrom<EnvironmentFile> for Environment {
    type Error = ProcessError;

    fn try_from(file: EnvironmentFile) -> Result<Self, Self::Error> {
        let rows = file
            .indicators
            .into_iter()
            .enumerate()
            .map(|(n, row)| {
                row.into_iter()
                    .map(|x| match x {
                        0 => Ok(false),
                        1 => Ok(true),
                        other => Err(ProcessError::Dimension(format!(
                            "indicator {other} at row {n} is not 0 or 1"
                        ))),
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Environment::quenched(file.p, IndicatorMatrix::from_rows(rows)?)
    }
}

impl EnvironmentFile {
    pub fn from_environment(env: &Environment) -> Option<Self> {
        let m = env.indicators()?;
        Some(EnvironmentFile {
            p: env.p,
            indicators: (0..m.horizon)
                .map(|n| m.row(n).iter().map(|&s| s as u8).collect())
                .collect(),
        })
    }
}
