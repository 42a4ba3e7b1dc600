use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::campaign::RunRecord;
use super::config::GridPoint;
use crate::analysis::{check_ce, phase_max_nonconformists};
use crate::stats::{nearest_rank, wilson_interval, Z_95};

/// Estimated probability of a given number of nonconformist urns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NncEstimate {
    pub n_nc: usize,
    pub count: u64,
    pub estimate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSummary {
    pub mean: f64,
    pub median: u64,
    pub p90: u64,
    pub max: u64,
}

/// Per-grid-point summary. `empty` marks points that produced no records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub grid: u64,
    pub p: f64,
    pub urns: usize,
    pub empty: bool,
    pub records: u64,
    pub failed: u64,
    pub fixated: u64,
    pub fixation_frequency: Option<f64>,
    pub resolved: u64,
    /// `P[N_nc = i]` for `i = 0..=urns`, over all records of the point.
    pub nnc: Vec<NncEstimate>,
    /// Resolved runs whose nonconformist count breaks the conformism equation.
    pub ce_violations: u64,
    pub nnc_max_observed: Option<usize>,
    pub last_deviation: Option<DeviationSummary>,
    /// Two urns only.
    pub mean_fixed_point_distance: Option<f64>,
}

/// Mergeable accumulator for one grid point. Merging is commutative and
/// associative; order-sensitive reductions happen in [`finish`](Self::finish)
/// on sorted data.
#[derive(Debug, Clone, PartialEq)]
pub struct PointAccumulator {
    point: GridPoint,
    records: u64,
    failed: u64,
    fixated: u64,
    resolved: u64,
    nnc_counts: Vec<u64>,
    ce_violations: u64,
    last_deviation: Vec<u64>,
    fixed_point_distance: Vec<f64>,
}

impl PointAccumulator {
    pub fn new(point: GridPoint) -> Self {
        PointAccumulator {
            point,
            records: 0,
            failed: 0,
            fixated: 0,
            resolved: 0,
            nnc_counts: vec![0; point.urns + 1],
            ce_violations: 0,
            last_deviation: Vec::new(),
            fixed_point_distance: Vec::new(),
        }
    }

    pub fn add(&mut self, r: &RunRecord) {
        debug_assert_eq!(r.grid, self.point.index);
        self.records += 1;
        if !r.is_ok() {
            self.failed += 1;
            return;
        }
        if let Some(f) = &r.fixation {
            if f.fixated {
                self.fixated += 1;
            }
            self.last_deviation.push(f.last_deviation_step);
        }
        if let Some(s) = r.resolved_suitability() {
            self.resolved += 1;
            self.nnc_counts[s.n_nc] += 1;
            if !check_ce(self.point.p, self.point.urns, s.n_nc) {
                self.ce_violations += 1;
            }
        }
        if let Some(nfp) = &r.nearest_fixed_point {
            self.fixed_point_distance.push(nfp.distance);
        }
    }

    pub fn merge(&mut self, other: &PointAccumulator) {
        debug_assert_eq!(self.point.index, other.point.index);
        self.records += other.records;
        self.failed += other.failed;
        self.fixated += other.fixated;
        self.resolved += other.resolved;
        for (a, b) in self.nnc_counts.iter_mut().zip(&other.nnc_counts) {
            *a += b;
        }
        self.ce_violations += other.ce_violations;
        self.last_deviation.extend_from_slice(&other.last_deviation);
        self.fixed_point_distance.extend_from_slice(&other.fixed_point_distance);
    }

    pub fn finish(&self) -> AggregateStats {
        let n = self.records;
        let nnc = self
            .nnc_counts
            .iter()
            .enumerate()
            .map(|(i, &count)| {
                let (lo, hi) = wilson_interval(count, n, Z_95);
                NncEstimate {
                    n_nc: i,
                    count,
                    estimate: if n == 0 { 0.0 } else { count as f64 / n as f64 },
                    wilson_low: lo,
                    wilson_high: hi,
                }
            })
            .collect();
        let mut devs = self.last_deviation.clone();
        devs.sort_unstable();
        let last_deviation = (!devs.is_empty()).then(|| DeviationSummary {
            mean: devs.iter().map(|&d| u128::from(d)).sum::<u128>() as f64 / devs.len() as f64,
            median: nearest_rank(&devs, 0.5).unwrap(),
            p90: nearest_rank(&devs, 0.9).unwrap(),
            max: *devs.last().unwrap(),
        });
        let mut dist = self.fixed_point_distance.clone();
        dist.sort_by(f64::total_cmp);
        AggregateStats {
            grid: self.point.index,
            p: self.point.p,
            urns: self.point.urns,
            empty: n == 0,
            records: n,
            failed: self.failed,
            fixated: self.fixated,
            fixation_frequency: (n > 0).then(|| self.fixated as f64 / n as f64),
            resolved: self.resolved,
            nnc,
            ce_violations: self.ce_violations,
            nnc_max_observed: self.nnc_counts.iter().rposition(|&c| c > 0),
            last_deviation,
            mean_fixed_point_distance: (!dist.is_empty()).then(|| dist.iter().sum::<f64>() / dist.len() as f64),
        }
    }
}

/// Aggregate records into one summary per grid point, in grid order.
/// Points without records get an explicit empty entry.
pub fn aggregate<'a>(points: &[GridPoint], records: impl IntoIterator<Item = &'a RunRecord>) -> Vec<AggregateStats> {
    let mut acc: BTreeMap<u64, PointAccumulator> =
        points.iter().map(|p| (p.index, PointAccumulator::new(*p))).collect();
    for r in records {
        if let Some(a) = acc.get_mut(&r.grid) {
            a.add(r);
        }
    }
    acc.values().map(PointAccumulator::finish).collect()
}

/// Theory-vs-observation row for one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub p: f64,
    pub urns: usize,
    pub theoretical_max: usize,
    /// `None` when no run at this point resolved.
    pub empirical_max: Option<usize>,
    pub violation: bool,
}

impl PhaseRow {
    pub fn status(&self) -> &'static str {
        match (self.empirical_max, self.violation) {
            (None, _) => "no data",
            (Some(_), true) => "violation",
            (Some(_), false) => "ok",
        }
    }
}

/// Compare the largest observed nonconformist count against the bound.
pub fn phase_table(stats: &[AggregateStats]) -> Vec<PhaseRow> {
    stats
        .iter()
        .map(|s| {
            let theoretical_max = phase_max_nonconformists(s.p, s.urns);
            let empirical_max = if s.resolved == 0 { None } else { s.nnc_max_observed };
            PhaseRow {
                p: s.p,
                urns: s.urns,
                theoretical_max,
                empirical_max,
                violation: empirical_max.is_some_and(|m| m > theoretical_max),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{FixationReport, Margins, SuitabilityReport};
    use crate::harness::campaign::{RunStatus, RECORD_SCHEMA_VERSION};
    use proptest::prelude::*;

    const POINT: GridPoint = GridPoint { index: 0, p: 0.2, urns: 3 };

    fn record(rep: u64, fixated: bool, nnc: Option<usize>, dev: u64) -> RunRecord {
        RunRecord {
            v: RECORD_SCHEMA_VERSION,
            grid: 0,
            p: POINT.p,
            urns: POINT.urns,
            replication: rep,
            status: RunStatus::Ok,
            error: None,
            fixation: Some(FixationReport {
                fixated,
                color: fixated.then_some(0),
                last_deviation_step: dev,
                window: 10,
                horizon: 100,
                margin: Margins { per_urn: vec![1, 1, 1], pooled: 3 },
            }),
            suitability: Some(SuitabilityReport {
                resolved: nnc.is_some(),
                color_d: 0,
                n0: 3,
                conformists: vec![],
                nonconformists: vec![],
                n_c: 3 - nnc.unwrap_or(0),
                n_nc: nnc.unwrap_or(0),
                ce_satisfied: true,
                predicted_share: 1.0,
                observed_share: 1.0,
            }),
            alphas: vec![1.0; 3],
            nearest_fixed_point: None,
            wall_ms: None,
        }
    }

    #[test]
    fn all_fixated() {
        let recs: Vec<_> = (0..100).map(|i| record(i, true, Some(0), i)).collect();
        let s = &aggregate(&[POINT], &recs)[0];
        assert_eq!(s.fixation_frequency, Some(1.0));
        assert_eq!(s.last_deviation.as_ref().unwrap().median, 49);
        assert_eq!(s.last_deviation.as_ref().unwrap().mean, 49.5);
    }

    #[test]
    fn nnc_distribution_with_wilson() {
        let recs: Vec<_> = (0..100).map(|i| record(i, false, Some(usize::from(i >= 60)), 0)).collect();
        let s = &aggregate(&[POINT], &recs)[0];
        let one = &s.nnc[1];
        assert_eq!(one.estimate, 0.4);
        assert!((one.wilson_low - 0.31).abs() < 0.005, "{}", one.wilson_low);
        assert!((one.wilson_high - 0.50).abs() < 0.005, "{}", one.wilson_high);
        assert_eq!(s.nnc_max_observed, Some(1));
        assert_eq!(s.ce_violations, 0);
    }

    #[test]
    fn estimates_sum_to_resolved_share_and_violations_counted() {
        let mut recs: Vec<_> = (0..10).map(|i| record(i, false, Some((i % 3) as usize), 0)).collect();
        recs.push(record(10, false, None, 0));
        let mut failed = record(11, false, None, 0);
        failed.status = RunStatus::Failed;
        recs.push(failed);
        let s = &aggregate(&[POINT], &recs)[0];
        let sum: f64 = s.nnc.iter().map(|e| e.estimate).sum();
        assert!((sum - 10.0 / 12.0).abs() < 1e-12);
        assert_eq!(s.failed, 1);
        // p = 0.2, U = 3 allows one nonconformist urn.
        assert_eq!(s.ce_violations, 3);
        let rows = phase_table(std::slice::from_ref(s));
        assert_eq!(rows[0].theoretical_max, 1);
        assert_eq!(rows[0].empirical_max, Some(2));
        assert!(rows[0].violation);
        assert_eq!(rows[0].status(), "violation");
    }

    #[test]
    fn empty_points_marked() {
        let other = GridPoint { index: 1, p: 0.6, urns: 2 };
        let recs = vec![record(0, true, Some(0), 0)];
        let stats = aggregate(&[POINT, other], &recs);
        assert!(!stats[0].empty);
        assert!(stats[1].empty);
        assert_eq!(stats[1].fixation_frequency, None);
        let rows = phase_table(&stats);
        assert_eq!(rows[1].status(), "no data");
        assert_eq!(rows[1].theoretical_max, 0);
    }

    #[test]
    fn phase_rows_for_reference_points() {
        let at = |p: f64, urns: usize| PointAccumulator::new(GridPoint { index: 0, p, urns }).finish();
        assert_eq!(phase_table(&[at(0.6, 4)])[0].theoretical_max, 0);
        assert_eq!(phase_table(&[at(0.1, 7)])[0].theoretical_max, 3);
    }

    proptest! {
        #[test]
        fn order_and_grouping_do_not_matter(
            cases in prop::collection::vec((any::<bool>(), prop::option::of(0usize..4), 0u64..1000), 1..60),
            seed in any::<u64>(),
            split in 0usize..60,
        ) {
            let recs: Vec<_> = cases.iter().enumerate().map(|(i, &(f, n, d))| {
                let mut r = record(i as u64, f, n, d);
                r.nearest_fixed_point = Some(crate::analysis::nearest_fixed_point((d as f64 / 1000.0, 0.3), 0.2));
                r
            }).collect();
            let mut shuffled = recs.clone();
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            let a = aggregate(&[POINT], &recs);
            prop_assert_eq!(&a, &aggregate(&[POINT], &shuffled));

            let split = split.min(recs.len());
            let mut left = PointAccumulator::new(POINT);
            let mut right = PointAccumulator::new(POINT);
            recs[..split].iter().for_each(|r| left.add(r));
            recs[split..].iter().for_each(|r| right.add(r));
            let mut lr = left.clone();
            lr.merge(&right);
            let mut rl = right.clone();
            rl.merge(&left);
            prop_assert_eq!(&lr.finish(), &a[0]);
            prop_assert_eq!(&rl.finish(), &a[0]);
        }
    }
}
