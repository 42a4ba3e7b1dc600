use serde::{Deserialize, Serialize};

use super::ProcessError;

/// Ball counts of every urn at time `n`. Row `u` holds the per-color counts
/// of urn `u`, and each row sums to `n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StateRecord", into = "StateRecord")]
pub struct UrnState {
    n: u64,
    urns: usize,
    colors: usize,
    counts: Vec<u64>,
}

impl UrnState {
    /// The empty configuration every run starts from.
    pub fn empty(urns: usize, colors: usize) -> Self {
        UrnState {
            n: 0,
            urns,
            colors,
            counts: vec![0; urns * colors],
        }
    }

    /// Build from explicit rows; checks the conservation invariant.
    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self, ProcessError> {
        let urns = rows.len();
        if urns == 0 {
            return Err(ProcessError::NoUrns);
        }
        let colors = rows[0].len();
        if rows.iter().any(|r| r.len() != colors) {
            return Err(ProcessError::Dimension("ragged counts matrix".into()));
        }
        let n = rows[0].iter().sum();
        let state = UrnState {
            n,
            urns,
            colors,
            counts: rows.into_iter().flatten().collect(),
        };
        state.check_invariants()?;
        Ok(state)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn urns(&self) -> usize {
        self.urns
    }

    pub fn colors(&self) -> usize {
        self.colors
    }

    pub fn row(&self, u: usize) -> &[u64] {
        &self.counts[u * self.colors..(u + 1) * self.colors]
    }

    pub fn count(&self, u: usize, c: usize) -> u64 {
        self.counts[u * self.colors + c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks(self.colors)
    }

    /// Per-color totals over all urns (`B_n^*`, `W_n^*`, ...).
    pub fn column_totals(&self) -> Vec<u64> {
        let mut totals = vec![0; self.colors];
        self.column_totals_into(&mut totals);
        totals
    }

    pub(crate) fn column_totals_into(&self, out: &mut [u64]) {
        out.iter_mut().for_each(|t| *t = 0);
        for row in self.rows() {
            for (t, c) in out.iter_mut().zip(row) {
                *t += c;
            }
        }
    }

    /// Add one ball of `colors[u]` to every urn `u` and advance time.
    pub(crate) fn apply(&mut self, drawn: &[u8]) {
        debug_assert_eq!(drawn.len(), self.urns);
        for (u, &c) in drawn.iter().enumerate() {
            self.counts[u * self.colors + c as usize] += 1;
        }
        self.n += 1;
    }

    pub fn check_invariants(&self) -> Result<(), ProcessError> {
        if self.counts.len() != self.urns * self.colors {
            return Err(ProcessError::Dimension("counts length".into()));
        }
        for (u, row) in self.rows().enumerate() {
            let total: u64 = row.iter().sum();
            if total != self.n {
                return Err(ProcessError::Conservation {
                    urn: u,
                    total,
                    n: self.n,
                });
            }
        }
        Ok(())
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        self.rows().map(<[u64]>::to_vec).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct StateRecord {
    n: u64,
    counts: Vec<Vec<u64>>,
}

impl TryFrom<StateRecord> for UrnState {
    type Error = ProcessError;

    fn try_from(rec: StateRecord) -> Result<Self, Self::Error> {
        let state = UrnState::from_rows(rec.counts)?;
        if state.n != rec.n {
            return Err(ProcessError::Conservation {
                urn: 0,
                total: state.n,
                n: rec.n,
            });
        }
        Ok(state)
    }
}

impl From<UrnState> for StateRecord {
    fn from(s: UrnState) -> Self {
        StateRecord {
            n: s.n,
            counts: s.to_rows(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_keeps_rows_balanced() {
        let mut s = UrnState::empty(3, 2);
        s.apply(&[0, 1, 1]);
        s.apply(&[0, 0, 1]);
        assert_eq!(s.n(), 2);
        assert_eq!(s.row(0), &[2, 0]);
        assert_eq!(s.row(1), &[1, 1]);
        assert_eq!(s.column_totals(), vec![3, 3]);
        s.check_invariants().unwrap();
    }

    #[test]
    fn unbalanced_rows_rejected() {
        let err = UrnState::from_rows(vec![vec![2, 1], vec![1, 1]]).unwrap_err();
        assert!(matches!(err, ProcessError::Conservation { urn: 1, .. }));
    }

    #[test]
    fn json_record_shape() {
        let s = UrnState::from_rows(vec![vec![3, 0], vec![1, 2]]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"n":3,"counts":[[3,0],[1,2]]}"#);
        let back: UrnState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<UrnState>(r#"{"n":4,"counts":[[3,0],[1,2]]}"#).is_err());
    }
}
