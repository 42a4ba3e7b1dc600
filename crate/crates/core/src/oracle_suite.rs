//! Agreement checks between the exact enumerator and the simulation engine
//! on small instances.

use rayon::prelude::*;
use serde::Serialize;

use crate::process::{
    enumerate_exact, enumerate_exact_guarded, path_count, run, Environment, PathLaw, ProcessError, RandomSource,
    RunConfig, UrnState,
};
use crate::weights::WeightModel;

/// Monte Carlo frequencies must land within this many standard errors.
pub const SIGMA_TOLERANCE: f64 = 4.0;
/// Tolerance on normalisation, factorisation and pooling identities.
pub const EXACT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_RUNS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleInstance {
    pub urns: usize,
    pub colors: usize,
    pub steps: u32,
    pub rho: f64,
    pub p: f64,
}

impl std::fmt::Display for OracleInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "U={} C={} N={} rho={} p={}",
            self.urns, self.colors, self.steps, self.rho, self.p
        )
    }
}

/// `U <= 2`, `C = 2`, `N <= 3`, `rho in {1.5, 2, 4}`, `p in {0, 0.3, 0.5, 0.8, 1}`.
pub fn default_instances() -> Vec<OracleInstance> {
    let mut out = Vec::new();
    for urns in 1..=2 {
        for steps in 1..=3 {
            for rho in [1.5, 2.0, 4.0] {
                for p in [0.0, 0.3, 0.5, 0.8, 1.0] {
                    out.push(OracleInstance {
                        urns,
                        colors: 2,
                        steps,
                        rho,
                        p,
                    });
                }
            }
        }
    }
    out
}

/// Deliberate corruption of the simulated kernel, to check the checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Simulate with `rho^2` while the oracle keeps `rho`.
    SquaredRho,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceReport {
    pub instance: OracleInstance,
    pub paths: usize,
    pub runs: u64,
    pub normalisation_error: f64,
    /// Largest `|freq - P| / se` over paths.
    pub max_sigma: f64,
    pub max_abs_deviation: f64,
    /// Distance to the product of single-urn laws (`p = 0` only).
    pub factorisation_error: Option<f64>,
    /// Distance to the pooled-only law (`p = 1` only).
    pub pooling_error: Option<f64>,
    pub color_symmetric: bool,
    pub pass: bool,
}

fn swap_colors(path: &[u8], colors: usize) -> Vec<u8> {
    // Reverse the color order; a permutation for any C.
    path.iter().map(|&c| (colors - 1 - c as usize) as u8).collect()
}

fn max_abs_diff(a: &PathLaw, b: &PathLaw) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, pa) in a {
        let pb = b.get(k).copied().unwrap_or(0.0);
        worst = worst.max((pa - pb).abs());
    }
    for (k, pb) in b {
        if !a.contains_key(k) {
            worst = worst.max(pb.abs());
        }
    }
    worst
}

/// Law of a variant mechanism whose draws always use the pooled counts.
pub fn enumerate_pooled_only(model: &WeightModel, urns: usize, colors: usize, steps: u32) -> PathLaw {
    fn go(
        model: &WeightModel,
        state: &UrnState,
        steps: u64,
        prob: f64,
        path: &mut Vec<u8>,
        out: &mut PathLaw,
        colors: usize,
    ) {
        if state.n() == steps {
            out.insert(path.clone(), prob);
            return;
        }
        let pooled = model.draw_probabilities(&state.column_totals());
        let urns = state.urns();
        let total = (colors as u64).pow(urns as u32);
        for code in 0..total {
            let mut choice = vec![0u8; urns];
            let mut rest = code;
            for u in (0..urns).rev() {
                choice[u] = (rest % colors as u64) as u8;
                rest /= colors as u64;
            }
            let q = choice.iter().fold(prob, |acc, &c| acc * pooled[c as usize]);
            let mut rows = state.to_rows();
            for (u, &c) in choice.iter().enumerate() {
                rows[u][c as usize] += 1;
            }
            let next = UrnState::from_rows(rows).expect("balanced");
            path.extend_from_slice(&choice);
            go(model, &next, steps, q, path, out, colors);
            path.truncate(path.len() - urns);
        }
    }
    let mut out = PathLaw::new();
    go(
        model,
        &UrnState::empty(urns, colors),
        u64::from(steps),
        1.0,
        &mut Vec::new(),
        &mut out,
        colors,
    );
    out
}

/// Product of independent single-urn laws.
fn product_of_single_urns(model: &WeightModel, urns: usize, colors: usize, steps: u32) -> Result<PathLaw, ProcessError> {
    let single = enumerate_exact(model, 0.0, 1, colors, steps, None)?;
    let mut joint = PathLaw::new();
    let combos = single.len().pow(urns as u32);
    let singles: Vec<(&Vec<u8>, &f64)> = single.iter().collect();
    for code in 0..combos {
        let mut rest = code;
        let mut picks = Vec::with_capacity(urns);
        for _ in 0..urns {
            picks.push(singles[rest % singles.len()]);
            rest /= singles.len();
        }
        let mut path = vec![0u8; steps as usize * urns];
        let mut prob = 1.0;
        for (u, (p, q)) in picks.iter().enumerate() {
            for n in 0..steps as usize {
                path[n * urns + u] = p[n];
            }
            prob *= *q;
        }
        joint.insert(path, prob);
    }
    Ok(joint)
}

/// Compare the exact law of `inst` against `runs` seeded simulations.
pub fn check_instance(
    inst: &OracleInstance,
    runs: u64,
    seed: u64,
    instance_key: u64,
    max_paths: u64,
    fault: Fault,
) -> Result<InstanceReport, ProcessError> {
    let model = WeightModel::exponential(inst.rho).expect("instance rho > 1");
    let law = enumerate_exact_guarded(&model, inst.p, inst.urns, inst.colors, inst.steps, None, max_paths)?;
    let normalisation_error = (law.values().sum::<f64>() - 1.0).abs();

    let color_symmetric = law
        .iter()
        .all(|(path, &p)| law.get(&swap_colors(path, inst.colors)) == Some(&p));

    let factorisation_error = if inst.p == 0.0 {
        Some(max_abs_diff(&law, &product_of_single_urns(&model, inst.urns, inst.colors, inst.steps)?))
    } else {
        None
    };
    let pooling_error = if inst.p == 1.0 {
        Some(max_abs_diff(&law, &enumerate_pooled_only(&model, inst.urns, inst.colors, inst.steps)))
    } else {
        None
    };

    let sim_model = match fault {
        Fault::None => model.clone(),
        Fault::SquaredRho => WeightModel::exponential(inst.rho * inst.rho).expect("rho^2 > 1"),
    };
    let env = Environment::annealed(inst.p)?;
    let counts: std::collections::BTreeMap<Vec<u8>, u64> = (0..runs)
        .into_par_iter()
        .fold(std::collections::BTreeMap::new, |mut acc, rep| {
            let cfg = RunConfig::new(
                sim_model.clone(),
                env.clone(),
                inst.urns,
                inst.colors,
                u64::from(inst.steps),
                RandomSource::with_key(seed, instance_key, rep),
            );
            let trace = run(&cfg).expect("valid small run");
            *acc.entry(trace.draws().to_vec()).or_insert(0u64) += 1;
            acc
        })
        .reduce(std::collections::BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });

    let mut max_sigma: f64 = 0.0;
    let mut max_abs_deviation: f64 = 0.0;
    let mut unexpected = false;
    for (path, &prob) in &law {
        let freq = counts.get(path).copied().unwrap_or(0) as f64 / runs as f64;
        let se = (prob * (1.0 - prob) / runs as f64).sqrt();
        let dev = (freq - prob).abs();
        max_abs_deviation = max_abs_deviation.max(dev);
        if se > 0.0 {
            max_sigma = max_sigma.max(dev / se);
        } else if dev > 0.0 {
            max_sigma = f64::INFINITY;
        }
    }
    for path in counts.keys() {
        if !law.contains_key(path) {
            unexpected = true;
        }
    }

    let pass = normalisation_error <= EXACT_TOLERANCE
        && max_sigma <= SIGMA_TOLERANCE
        && !unexpected
        && factorisation_error.is_none_or(|e| e <= EXACT_TOLERANCE)
        && pooling_error.is_none_or(|e| e <= EXACT_TOLERANCE)
        && color_symmetric;
    Ok(InstanceReport {
        instance: *inst,
        paths: law.len(),
        runs,
        normalisation_error,
        max_sigma,
        max_abs_deviation,
        factorisation_error,
        pooling_error,
        color_symmetric,
        pass,
    })
}

/// Guard an instance request before doing any work.
pub fn check_guard(inst: &OracleInstance, max_paths: u64) -> Result<(), ProcessError> {
    match path_count(inst.urns, inst.colors, inst.steps) {
        Some(n) if n <= max_paths => Ok(()),
        _ => Err(ProcessError::OracleGuard {
            urns: inst.urns,
            colors: inst.colors,
            steps: inst.steps,
            limit: max_paths,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_set_size() {
        assert_eq!(default_instances().len(), 90);
    }

    #[test]
    fn pooled_variant_matches_p_one() {
        let m = WeightModel::exponential(2.0).unwrap();
        let a = enumerate_exact(&m, 1.0, 2, 2, 3, None).unwrap();
        let b = enumerate_pooled_only(&m, 2, 2, 3);
        assert!(max_abs_diff(&a, &b) < 1e-15);
        // and differs from the mixed law
        let c = enumerate_exact(&m, 0.5, 2, 2, 3, None).unwrap();
        assert!(max_abs_diff(&c, &b) > 1e-3);
    }

    #[test]
    fn three_color_symmetry_exact() {
        let m = WeightModel::exponential(1.5).unwrap();
        let law = enumerate_exact(&m, 0.35, 2, 3, 2, None).unwrap();
        let perms: [[u8; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for perm in perms {
            for (path, &p) in &law {
                let mapped: Vec<u8> = path.iter().map(|&c| perm[c as usize]).collect();
                assert_eq!(law[&mapped], p);
            }
        }
    }

    #[test]
    fn small_check_passes_and_fault_is_caught() {
        let inst = OracleInstance {
            urns: 2,
            colors: 2,
            steps: 2,
            rho: 2.0,
            p: 0.5,
        };
        let ok = check_instance(&inst, 20_000, 1, 0, 1_000_000, Fault::None).unwrap();
        assert!(ok.pass, "{ok:?}");
        let bad = check_instance(&inst, 20_000, 1, 0, 1_000_000, Fault::SquaredRho).unwrap();
        assert!(!bad.pass);
        assert!(check_instance(&inst, 10, 1, 0, 8, Fault::None).is_err());
    }
}
