use std::fs;
use std::path::Path;

use interurn::harness::{execute_campaign, CampaignConfig, HarnessError, Manifest};

fn config(dir: &Path) -> CampaignConfig {
    let mut c: CampaignConfig = serde_json::from_str(
        r#"{"model": {"kind": "exponential", "rho": 2.0},
            "p_grid": [0.2, 0.6], "u_grid": [2, 3],
            "horizon": 400, "replications": 10, "seed": 5}"#,
    )
    .unwrap();
    c.output.dir = dir.display().to_string();
    c
}

fn snapshot(dir: &Path) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    (
        fs::read(dir.join("records.jsonl")).unwrap(),
        fs::read(dir.join("summary.csv")).unwrap(),
        fs::read(dir.join("phase_table.csv")).unwrap(),
    )
}

#[test]
fn rerun_reuses_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path());
    let first = execute_campaign(&c, 2).unwrap();
    assert_eq!(first.computed_points, vec![0, 1, 2, 3]);
    assert_eq!(first.records.len(), 40);
    let before = snapshot(tmp.path());
    let second = execute_campaign(&c, 4).unwrap();
    assert!(second.computed_points.is_empty());
    assert_eq!(second.reused_points.len(), 4);
    assert_eq!(snapshot(tmp.path()), before);
}

#[test]
fn interrupted_point_is_redone() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path());
    execute_campaign(&c, 2).unwrap();
    let expected = snapshot(tmp.path());

    // Pretend the process died while writing the last point.
    let manifest_path = tmp.path().join("manifest.json");
    let mut m = Manifest::load(&manifest_path).unwrap().unwrap();
    let records = fs::read(tmp.path().join("records.jsonl")).unwrap();
    let keep: usize = records.split_inclusive(|&b| b == b'\n').take(30).map(|l| l.len()).sum();
    m.points[3].complete = false;
    m.records_bytes = keep as u64;
    m.store(&manifest_path).unwrap();
    let mut torn = records[..keep + 15].to_vec();
    torn.extend_from_slice(b"{\"v\":1,\"gri");
    fs::write(tmp.path().join("records.jsonl"), torn).unwrap();

    let out = execute_campaign(&c, 3).unwrap();
    assert_eq!(out.computed_points, vec![3]);
    assert_eq!(out.reused_points, vec![0, 1, 2]);
    assert_eq!(snapshot(tmp.path()), expected);
}

#[test]
fn changed_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = config(tmp.path());
    execute_campaign(&c, 1).unwrap();
    c.seed += 1;
    assert!(matches!(execute_campaign(&c, 1), Err(HarnessError::ManifestMismatch { .. })));
}

#[test]
fn effective_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path());
    execute_campaign(&c, 1).unwrap();
    let text = fs::read_to_string(tmp.path().join("config.json")).unwrap();
    let back: CampaignConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back.content_hash(), c.content_hash());
}
