use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::analysis::{default_window, DEFAULT_TAIL_FRACTION};
use crate::process::MAX_HORIZON;
use crate::weights::WeightModel;

fn two() -> usize {
    2
}

fn default_tail_fraction() -> f64 {
    DEFAULT_TAIL_FRACTION
}

/// File names of a campaign's artifacts, relative to its output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub dir: String,
    pub records: String,
    pub summary: String,
    pub phase_table: String,
    pub manifest: String,
    pub effective_config: String,
}

impl Default for OutputPaths {
    fn default() -> Self {
        OutputPaths {
            dir: "campaign".into(),
            records: "records.jsonl".into(),
            summary: "summary.csv".into(),
            phase_table: "phase_table.csv".into(),
            manifest: "manifest.json".into(),
            effective_config: "config.json".into(),
        }
    }
}

/// A sweep over `p_grid x u_grid` with `replications` seeded runs per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub model: WeightModel,
    pub p_grid: Vec<f64>,
    pub u_grid: Vec<usize>,
    #[serde(default = "two")]
    pub colors: usize,
    pub horizon: u64,
    pub replications: u64,
    pub seed: u64,
    /// Fixation window; `max(500, horizon / 4)` when absent.
    #[serde(default)]
    pub window: Option<u64>,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    /// Store per-run wall time in records. Off by default because it makes
    /// record files differ between reruns.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub output: OutputPaths,
}

/// One `(p, U)` cell of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: u64,
    pub p: f64,
    pub urns: usize,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.p_grid.is_empty() {
            return bad("p_grid must not be empty".into());
        }
        if self.u_grid.is_empty() {
            return bad("u_grid must not be empty".into());
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("p_grid value {p} is outside [0, 1]"));
        }
        if self.u_grid.contains(&0) {
            return bad("u_grid values must be >= 1".into());
        }
        if !(2..=256).contains(&self.colors) {
            return bad(format!("colors must be in 2..=256, got {}", self.colors));
        }
        if self.horizon == 0 || self.horizon > MAX_HORIZON {
            return bad(format!("horizon must be in 1..=2^31, got {}", self.horizon));
        }
        if self.replications == 0 {
            return bad("replications must be >= 1".into());
        }
        if let Some(w) = self.window {
            if w == 0 || w > self.horizon {
                return bad(format!("window {w} must be in 1..={}", self.horizon));
            }
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return bad(format!("tail_fraction must lie in (0, 1], got {}", self.tail_fraction));
        }
        Ok(())
    }

    pub fn effective_window(&self) -> u64 {
        self.window.unwrap_or_else(|| default_window(self.horizon))
    }

    /// Grid points in `p`-major order; the index feeds the random source key.
    pub fn grid_points(&self) -> Vec<GridPoint> {
        let mut points = Vec::with_capacity(self.p_grid.len() * self.u_grid.len());
        for &p in &self.p_grid {
            for &urns in &self.u_grid {
                points.push(GridPoint {
                    index: points.len() as u64,
                    p,
                    urns,
                });
            }
        }
        points
    }

    /// SHA-256 over everything that determines record content. Output
    /// locations are excluded.
    pub fn content_hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputPaths::default();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> CampaignConfig {
        serde_json::from_str(
            r#"{"model": {"kind": "exponential", "rho": 2.0},
                "p_grid": [0.2, 0.6], "u_grid": [2, 3, 4],
                "horizon": 100, "replications": 3, "seed": 5}"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_and_grid() {
        let c = sample();
        c.validate().unwrap();
        assert_eq!(c.colors, 2);
        assert_eq!(c.tail_fraction, 0.5);
        assert_eq!(c.effective_window(), 100);
        let pts = c.grid_points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[4], GridPoint { index: 4, p: 0.6, urns: 3 });
    }

    #[test]
    fn validation_failures() {
        let mut c = sample();
        c.p_grid.clear();
        assert!(c.validate().is_err());
        let mut c = sample();
        c.u_grid = vec![2, 0];
        assert!(c.validate().is_err());
        let mut c = sample();
        c.p_grid = vec![1.2];
        assert!(c.validate().is_err());
        let mut c = sample();
        c.replications = 0;
        assert!(c.validate().is_err());
        let mut c = sample();
        c.window = Some(101);
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<CampaignConfig>(r#"{"model": {"kind": "exponential", "rho": 2.0}, "bogus": 1}"#).is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = sample();
        let mut b = sample();
        b.output.dir = "elsewhere".into();
        assert_eq!(a.content_hash(), b.content_hash());
        b.seed = 6;
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }
}
