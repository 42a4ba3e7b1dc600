use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::aggregate::{AggregateStats, PhaseRow};
use super::campaign::{RunRecord, RECORD_SCHEMA_VERSION};
use super::HarnessError;

/// Header of the per-grid-point summary table.
///
/// `nnc_distribution` packs `n_nc:count:estimate:wilson_low:wilson_high`
/// entries separated by `;`. Empty cells mean "not applicable / no data".
pub const SUMMARY_HEADER: [&str; 16] = [
    "grid",
    "p",
    "urns",
    "records",
    "failed",
    "fixated",
    "fixation_frequency",
    "resolved",
    "ce_violations",
    "nnc_max_observed",
    "phase_bound",
    "nnc_distribution",
    "last_deviation_mean",
    "last_deviation_median",
    "last_deviation_p90",
    "mean_fixed_point_distance",
];

pub const PHASE_HEADER: [&str; 6] = ["p", "urns", "theoretical_max", "empirical_max", "violation", "status"];

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Append records as JSON lines.
pub fn append_records(path: &Path, records: &[RunRecord]) -> Result<u64, HarnessError> {
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| io_err(path)(e.into()))?;
        out.write_all(b"\n").map_err(io_err(path))?;
    }
    let file = out.into_inner().map_err(|e| io_err(path)(e.into_error()))?;
    file.sync_data().map_err(io_err(path))?;
    Ok(file.metadata().map_err(io_err(path))?.len())
}

pub fn write_records(path: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    File::create(path).map_err(io_err(path))?;
    append_records(path, records).map(|_| ())
}

#[derive(Deserialize)]
struct VersionProbe {
    v: u32,
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| HarnessError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        };
        let probe: VersionProbe = serde_json::from_str(&line).map_err(parse_err)?;
        if probe.v != RECORD_SCHEMA_VERSION {
            return Err(HarnessError::SchemaVersion {
                found: probe.v,
                expected: RECORD_SCHEMA_VERSION,
                line: i + 1,
            });
        }
        records.push(serde_json::from_str(&line).map_err(parse_err)?);
    }
    Ok(records)
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_summary(path: &Path, stats: &[AggregateStats], phase: &[PhaseRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(SUMMARY_HEADER).map_err(|e| csv_err(path, e))?;
    for (s, row) in stats.iter().zip(phase) {
        let dist = if s.empty {
            String::new()
        } else {
            s.nnc
                .iter()
                .map(|e| format!("{}:{}:{}:{}:{}", e.n_nc, e.count, e.estimate, e.wilson_low, e.wilson_high))
                .collect::<Vec<_>>()
                .join(";")
        };
        let dev = s.last_deviation.as_ref();
        w.write_record([
            s.grid.to_string(),
            s.p.to_string(),
            s.urns.to_string(),
            s.records.to_string(),
            s.failed.to_string(),
            s.fixated.to_string(),
            opt(s.fixation_frequency),
            s.resolved.to_string(),
            s.ce_violations.to_string(),
            opt(s.nnc_max_observed),
            row.theoretical_max.to_string(),
            dist,
            opt(dev.map(|d| d.mean)),
            opt(dev.map(|d| d.median)),
            opt(dev.map(|d| d.p90)),
            opt(s.mean_fixed_point_distance),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_phase_table(path: &Path, rows: &[PhaseRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(PHASE_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.p.to_string(),
            r.urns.to_string(),
            r.theoretical_max.to_string(),
            opt(r.empirical_max),
            r.violation.to_string(),
            r.status().to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source: e.into(),
    }
}

/// Progress of a campaign, rewritten after every completed grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub v: u32,
    pub config_hash: String,
    /// Length of the records file after the last completed point.
    pub records_bytes: u64,
    pub points: Vec<ManifestPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPoint {
    pub grid: u64,
    pub p: f64,
    pub urns: usize,
    pub complete: bool,
}

impl Manifest {
    pub fn is_complete(&self) -> bool {
        self.points.iter().all(|p| p.complete)
    }

    pub fn load(path: &Path) -> Result<Option<Self>, HarnessError> {
        match fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| HarnessError::Parse {
                path: path.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(path)(e)),
        }
    }

    /// Write via a temporary file and rename so a crash never leaves a torn manifest.
    pub fn store(&self, path: &Path) -> Result<(), HarnessError> {
        let tmp = path.with_extension("json.tmp");
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&tmp, text).map_err(io_err(&tmp))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    }
}
