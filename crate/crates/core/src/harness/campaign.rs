use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CampaignConfig, GridPoint};
use super::HarnessError;
use crate::analysis::{alphas_of, nearest_fixed_point, FixationReport, NearestFixedPoint, RunAnalyzer, SuitabilityReport};
use crate::process::{run_observed, Environment, RandomSource, RunConfig};

/// Version tag carried by every record line.
pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// Outcome of one replication at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub v: u32,
    pub grid: u64,
    pub p: f64,
    pub urns: usize,
    pub replication: u64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub fixation: Option<FixationReport>,
    /// Two-color runs only.
    pub suitability: Option<SuitabilityReport>,
    /// Per-urn frequency of color 0.
    pub alphas: Vec<f64>,
    /// Two urns, two colors only.
    pub nearest_fixed_point: Option<NearestFixedPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

impl RunRecord {
    fn failed(point: &GridPoint, replication: u64, error: String) -> Self {
        RunRecord {
            v: RECORD_SCHEMA_VERSION,
            grid: point.index,
            p: point.p,
            urns: point.urns,
            replication,
            status: RunStatus::Failed,
            error: Some(error),
            fixation: None,
            suitability: None,
            alphas: Vec::new(),
            nearest_fixed_point: None,
            wall_ms: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    pub fn resolved_suitability(&self) -> Option<&SuitabilityReport> {
        self.suitability.as_ref().filter(|s| s.resolved)
    }
}

/// Random source of replication `replication` at `point`.
pub fn replication_source(config: &CampaignConfig, point: &GridPoint, replication: u64) -> RandomSource {
    RandomSource::with_key(config.seed, point.index, replication)
}

/// Simulate and analyse one replication. Errors become failed records.
pub fn run_replication(config: &CampaignConfig, point: &GridPoint, replication: u64) -> RunRecord {
    let started = Instant::now();
    let mut record = match analyse_replication(config, point, replication) {
        Ok(r) => r,
        Err(e) => RunRecord::failed(point, replication, e.to_string()),
    };
    if config.record_wall_time {
        record.wall_ms = Some(started.elapsed().as_secs_f64() * 1e3);
    }
    record
}

fn analyse_replication(
    config: &CampaignConfig,
    point: &GridPoint,
    replication: u64,
) -> Result<RunRecord, HarnessError> {
    let env = Environment::annealed(point.p)?;
    let source = replication_source(config, point, replication);
    let run = RunConfig::new(config.model.clone(), env, point.urns, config.colors, config.horizon, source);
    let mut analyzer = RunAnalyzer::new(point.urns, config.colors);
    let final_state = run_observed(&run, &mut analyzer)?;
    let fixation = analyzer.fixation.finish(config.effective_window(), &final_state)?;
    let suitability = analyzer
        .suitability
        .as_ref()
        .map(|s| s.finish(point.p, config.tail_fraction, &final_state))
        .transpose()?;
    let alphas = alphas_of(&final_state, 0);
    let nearest = (point.urns == 2 && config.colors == 2).then(|| nearest_fixed_point((alphas[0], alphas[1]), point.p));
    Ok(RunRecord {
        v: RECORD_SCHEMA_VERSION,
        grid: point.index,
        p: point.p,
        urns: point.urns,
        replication,
        status: RunStatus::Ok,
        error: None,
        fixation: Some(fixation),
        suitability,
        alphas,
        nearest_fixed_point: nearest,
        wall_ms: None,
    })
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| (*s).to_owned())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "non-string panic payload".into())
}

/// Run `replications` jobs on `pool`, isolating panics, and return the
/// records ordered by replication id regardless of completion order.
pub(crate) fn run_point_with<F>(pool: &rayon::ThreadPool, point: &GridPoint, replications: u64, job: F) -> Vec<RunRecord>
where
    F: Fn(u64) -> RunRecord + Sync,
{
    let mut records: Vec<RunRecord> = pool.install(|| {
        (0..replications)
            .into_par_iter()
            .map(|rep| {
                catch_unwind(AssertUnwindSafe(|| job(rep)))
                    .unwrap_or_else(|p| RunRecord::failed(point, rep, format!("panic: {}", panic_message(p))))
            })
            .collect()
    });
    records.sort_by_key(|r| r.replication);
    records
}

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

/// All replications of one grid point.
pub fn run_point(config: &CampaignConfig, point: &GridPoint, pool: &rayon::ThreadPool) -> Vec<RunRecord> {
    run_point_with(pool, point, config.replications, |rep| run_replication(config, point, rep))
}

/// Run every grid point in order, handing each point's records to `sink`
/// as soon as the point completes. Record content does not depend on `jobs`.
pub fn run_campaign(
    config: &CampaignConfig,
    jobs: usize,
    mut sink: impl FnMut(&GridPoint, &[RunRecord]) -> Result<(), HarnessError>,
) -> Result<(), HarnessError> {
    config.validate()?;
    let pool = thread_pool(jobs)?;
    for point in config.grid_points() {
        let records = run_point(config, &point, &pool);
        sink(&point, &records)?;
    }
    Ok(())
}
