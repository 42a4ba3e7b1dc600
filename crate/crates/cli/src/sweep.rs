use std::fs;

use interurn::harness::{execute_campaign, CampaignConfig, HarnessError};

use crate::{CliError, CliResult, SweepArgs};

fn classify(e: HarnessError) -> CliError {
    match e {
        HarnessError::Config(_) | HarnessError::ManifestMismatch { .. } | HarnessError::Process(_) | HarnessError::Analysis(_) => {
            CliError::Usage(e.to_string())
        }
        HarnessError::Io { .. } | HarnessError::Parse { .. } | HarnessError::SchemaVersion { .. } => {
            CliError::Io(e.to_string())
        }
    }
}

pub fn run(args: SweepArgs) -> CliResult {
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let mut config: CampaignConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    if let Some(out) = args.out {
        config.output.dir = out.display().to_string();
    }

    let outcome = execute_campaign(&config, args.jobs).map_err(classify)?;
    eprintln!(
        "{} grid point(s) computed, {} reused; outputs in {}",
        outcome.computed_points.len(),
        outcome.reused_points.len(),
        config.output.dir
    );
    for row in &outcome.phase {
        println!(
            "p={} U={} bound={} observed={} {}",
            row.p,
            row.urns,
            row.theoretical_max,
            row.empirical_max.map_or("-".into(), |m| m.to_string()),
            row.status()
        );
    }

    let failed = outcome.failed_points();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Io(format!(
            "failed replications at grid point(s): {}",
            failed
                .iter()
                .map(|s| format!("#{} (p={}, U={}, {} failed)", s.grid, s.p, s.urns, s.failed))
                .collect::<Vec<_>>()
                .join(", ")
        )))
    }
}
