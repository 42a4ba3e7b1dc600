use std::str::FromStr;

use interurn::analysis::{check_ce, heuristic_fixed_points, limiting_proportion, phase_max_nonconformists};

use crate::{CalcArgs, CliError, CliResult};

fn parse<T: FromStr>(name: &str, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| CliError::Usage(format!("{name}: cannot parse {raw:?}")))
}

fn probability(raw: &str) -> Result<f64, CliError> {
    let p: f64 = parse("P", raw)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(CliError::Usage(format!("P must lie in [0, 1], got {p}")));
    }
    Ok(p)
}

fn urns(raw: &str) -> Result<usize, CliError> {
    let u: usize = parse("U", raw)?;
    if u == 0 {
        return Err(CliError::Usage("U must be at least 1".into()));
    }
    Ok(u)
}

fn triple(v: &[String]) -> Result<(f64, usize, usize), CliError> {
    let (p, u) = (probability(&v[0])?, urns(&v[1])?);
    let n: usize = parse("N", &v[2])?;
    if n > u {
        return Err(CliError::Usage(format!("N = {n} exceeds U = {u}")));
    }
    Ok((p, u, n))
}

pub fn run(args: CalcArgs) -> CliResult {
    if let Some(raw) = args.fixed_points {
        let p = probability(&raw)?;
        for (a1, a2) in heuristic_fixed_points(p) {
            println!("({a1}, {a2})");
        }
    } else if let Some(v) = args.max_nonconformists {
        let (p, u) = (probability(&v[0])?, urns(&v[1])?);
        println!("{}", phase_max_nonconformists(p, u));
    } else if let Some(v) = args.ce {
        let (p, u, n) = triple(&v)?;
        println!("{}", check_ce(p, u, n));
    } else if let Some(v) = args.share {
        let (p, u, n) = triple(&v)?;
        println!("{}", limiting_proportion(p, u, n));
    }
    Ok(())
}
