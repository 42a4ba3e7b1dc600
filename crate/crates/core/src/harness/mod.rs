//! Seeded replication campaigns over `(p, U)` grids, their aggregation and
//! on-disk artifacts.
//!
//! A campaign directory holds:
//!
//! - `config.json`: the effective configuration;
//! - `records.jsonl`: one [`RunRecord`] per line, grid point by grid point;
//! - `manifest.json`: config hash and per-point completion, used to resume;
//! - `summary.csv` and `phase_table.csv`: flat tables for plotting.

mod aggregate;
mod campaign;
mod config;
mod persist;

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use aggregate::{aggregate, phase_table, AggregateStats, DeviationSummary, NncEstimate, PhaseRow, PointAccumulator};
pub use campaign::{
    replication_source, run_campaign, run_point, run_replication, thread_pool, RunRecord, RunStatus,
    RECORD_SCHEMA_VERSION,
};
pub use config::{CampaignConfig, GridPoint, OutputPaths};
pub use persist::{
    append_records, read_records, write_phase_table, write_records, write_summary, Manifest, ManifestPoint,
    PHASE_HEADER, SUMMARY_HEADER,
};

use crate::analysis::AnalysisError;
use crate::process::ProcessError;
use persist::io_err;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid campaign config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("record schema version {found} at line {line} does not match supported version {expected}")]
    SchemaVersion { found: u32, expected: u32, line: usize },
    #[error("{path} belongs to a different campaign (config hash {found}, expected {expected})")]
    ManifestMismatch { path: String, found: String, expected: String },
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// What [`execute_campaign`] did and produced.
#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub records: Vec<RunRecord>,
    pub stats: Vec<AggregateStats>,
    pub phase: Vec<PhaseRow>,
    /// Grid points simulated in this invocation.
    pub computed_points: Vec<u64>,
    /// Grid points taken from a previous invocation.
    pub reused_points: Vec<u64>,
}

impl CampaignOutcome {
    /// Grid points with at least one failed replication.
    pub fn failed_points(&self) -> Vec<&AggregateStats> {
        self.stats.iter().filter(|s| s.failed > 0).collect()
    }
}

fn paths(config: &CampaignConfig) -> (PathBuf, PathBuf, PathBuf, PathBuf, PathBuf, PathBuf) {
    let dir = PathBuf::from(&config.output.dir);
    (
        dir.join(&config.output.records),
        dir.join(&config.output.manifest),
        dir.join(&config.output.summary),
        dir.join(&config.output.phase_table),
        dir.join(&config.output.effective_config),
        dir,
    )
}

fn truncate(path: &Path, len: u64) -> Result<(), HarnessError> {
    let file = OpenOptions::new().create(true).write(true).truncate(false).open(path).map_err(io_err(path))?;
    file.set_len(len).map_err(io_err(path))
}

/// Run a campaign into `config.output.dir`, resuming from its manifest.
///
/// Grid points already marked complete for the same config hash are not
/// recomputed; records of an interrupted point are discarded and redone.
pub fn execute_campaign(config: &CampaignConfig, jobs: usize) -> Result<CampaignOutcome, HarnessError> {
    config.validate()?;
    let (records_path, manifest_path, summary_path, phase_path, config_path, dir) = paths(config);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let mut effective = serde_json::to_string_pretty(config).expect("config serializes");
    effective.push('\n');
    fs::write(&config_path, effective).map_err(io_err(&config_path))?;

    let hash = config.content_hash();
    let points = config.grid_points();
    let mut manifest = match Manifest::load(&manifest_path)? {
        Some(m) if m.config_hash != hash => {
            return Err(HarnessError::ManifestMismatch {
                path: manifest_path.display().to_string(),
                found: m.config_hash,
                expected: hash,
            })
        }
        Some(m) => m,
        None => Manifest {
            v: RECORD_SCHEMA_VERSION,
            config_hash: hash,
            records_bytes: 0,
            points: points
                .iter()
                .map(|p| ManifestPoint {
                    grid: p.index,
                    p: p.p,
                    urns: p.urns,
                    complete: false,
                })
                .collect(),
        },
    };

    let mut computed = Vec::new();
    let mut reused = Vec::new();
    if manifest.is_complete() {
        reused.extend(points.iter().map(|p| p.index));
    } else {
        truncate(&records_path, manifest.records_bytes)?;
        manifest.store(&manifest_path)?;
        let pool = thread_pool(jobs)?;
        for point in &points {
            let slot = point.index as usize;
            if manifest.points[slot].complete {
                reused.push(point.index);
                continue;
            }
            let recs = run_point(config, point, &pool);
            manifest.records_bytes = append_records(&records_path, &recs)?;
            manifest.points[slot].complete = true;
            manifest.store(&manifest_path)?;
            computed.push(point.index);
        }
    }

    let records = read_records(&records_path)?;
    let stats = aggregate(&points, &records);
    let phase = phase_table(&stats);
    write_summary(&summary_path, &stats, &phase)?;
    write_phase_table(&phase_path, &phase)?;
    Ok(CampaignOutcome {
        records,
        stats,
        phase,
        computed_points: computed,
        reused_points: reused,
    })
}
