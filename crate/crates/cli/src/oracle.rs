use interurn::oracle_suite::{check_guard, check_instance, default_instances, Fault, OracleInstance};

use crate::{CliError, CliResult, OracleArgs};

fn instances(args: &OracleArgs) -> Result<Vec<OracleInstance>, CliError> {
    let Some(urns) = args.urns else {
        return Ok(default_instances());
    };
    let inst = OracleInstance {
        urns,
        colors: args.colors.unwrap_or(2),
        steps: args.steps.unwrap_or(2),
        rho: args.rho.unwrap_or(2.0),
        p: args.p.unwrap_or(0.5),
    };
    if urns == 0 || inst.steps == 0 {
        return Err(CliError::Usage("--urns and --steps must be at least 1".into()));
    }
    if !(2..=255).contains(&inst.colors) {
        return Err(CliError::Usage(format!("--colors must lie in 2..=255, got {}", inst.colors)));
    }
    if !(inst.rho > 1.0 && inst.rho.is_finite()) {
        return Err(CliError::Usage(format!("--rho must be finite and > 1, got {}", inst.rho)));
    }
    if !(0.0..=1.0).contains(&inst.p) {
        return Err(CliError::Usage(format!("--p must lie in [0, 1], got {}", inst.p)));
    }
    Ok(vec![inst])
}

pub fn run(args: OracleArgs) -> CliResult {
    if args.runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let list = instances(&args)?;
    for inst in &list {
        check_guard(inst, args.max_paths).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let fault = if args.inject_fault { Fault::SquaredRho } else { Fault::None };

    println!(
        "{:<34} {:>6} {:>10} {:>12} {:>10} {:>6}",
        "instance", "paths", "max_sigma", "max_abs_dev", "sum_err", "status"
    );
    let mut failed = Vec::new();
    for (i, inst) in list.iter().enumerate() {
        let rep = check_instance(inst, args.runs, args.seed, i as u64, args.max_paths, fault)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        println!(
            "{:<34} {:>6} {:>10.3} {:>12.3e} {:>10.1e} {:>6}",
            inst.to_string(),
            rep.paths,
            rep.max_sigma,
            rep.max_abs_deviation,
            rep.normalisation_error,
            if rep.pass { "ok" } else { "FAIL" }
        );
        if !rep.pass {
            failed.push(inst.to_string());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(format!(
            "{} instance(s) disagree with exact enumeration: {}",
            failed.len(),
            failed.join("; ")
        )))
    }
}
