use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use interurn::analysis::{alphas_of, default_window, nearest_fixed_point, FixationReport, NearestFixedPoint, RunAnalyzer, SuitabilityReport};
use interurn::process::{
    run_observed, Environment, EnvironmentFile, Fanout, JsonlTraceWriter, ProcessError, RandomSource, RunConfig,
};
use interurn::WeightModel;

use crate::{CliError, CliResult, SimulateArgs};

/// Every simulate setting; the config file and the effective config share
/// this shape.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Settings {
    model: Option<WeightModel>,
    p: Option<f64>,
    urns: Option<usize>,
    #[serde(default)]
    colors: Option<usize>,
    horizon: Option<u64>,
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quenched_env: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    snapshot_every: Option<u64>,
    window: Option<u64>,
    tail_fraction: Option<f64>,
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Report {
    model: String,
    p: f64,
    quenched: bool,
    urns: usize,
    colors: usize,
    horizon: u64,
    seed: u64,
    final_counts: Vec<Vec<u64>>,
    /// Per-urn frequency of color 0.
    alphas: Vec<f64>,
    fixation: FixationReport,
    suitability: Option<SuitabilityReport>,
    nearest_fixed_point: Option<NearestFixedPoint>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn merge(args: SimulateArgs) -> Result<Settings, CliError> {
    let mut s: Settings = match &args.config {
        Some(path) => read_json(path)?,
        None => Settings::default(),
    };
    if let Some(rho) = args.rho {
        s.model = Some(WeightModel::exponential(rho).map_err(|e| CliError::Usage(format!("--rho: {e}")))?);
    }
    if let Some(path) = &args.weights_file {
        s.model = Some(read_json(path)?);
    }
    macro_rules! take {
        ($($f:ident),*) => { $( if args.$f.is_some() { s.$f = args.$f; } )* };
    }
    take!(p, urns, colors, horizon, seed, quenched_env, snapshot_every, window, tail_fraction, out);
    Ok(s)
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing required value {flag} (flag or config file)")))
}

fn usage(e: ProcessError) -> CliError {
    match e {
        ProcessError::Io(_) => CliError::Io(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

pub fn run(args: SimulateArgs) -> CliResult {
    let mut s = merge(args)?;
    let env = match &s.quenched_env {
        Some(path) => {
            let file: EnvironmentFile = read_json(path)?;
            if let Some(p) = s.p {
                if p != file.p {
                    return Err(CliError::Usage(format!(
                        "--p {p} disagrees with p = {} in {}",
                        file.p,
                        path.display()
                    )));
                }
            }
            s.p = Some(file.p);
            Some(Environment::try_from(file).map_err(usage)?)
        }
        None => None,
    };

    let model = required(s.model.clone(), "--rho or --weights-file")?;
    let p = required(s.p, "--p")?;
    if !(0.0..=1.0).contains(&p) {
        return Err(CliError::Usage(format!("--p must lie in [0, 1], got {p}")));
    }
    let urns = required(s.urns, "--urns")?;
    let horizon = required(s.horizon, "--horizon")?;
    let seed = required(s.seed, "--seed")?;
    let colors = *s.colors.get_or_insert(2);
    let window = *s.window.get_or_insert(default_window(horizon));
    if window == 0 || window > horizon {
        return Err(CliError::Usage(format!("--window must lie in 1..={horizon}, got {window}")));
    }
    let tail_fraction = *s.tail_fraction.get_or_insert(0.5);
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(CliError::Usage(format!("--tail-fraction must lie in (0, 1], got {tail_fraction}")));
    }
    let out = s.out.get_or_insert_with(|| PathBuf::from("run")).clone();

    let env = match env {
        Some(e) => e,
        None => Environment::annealed(p).map_err(usage)?,
    };
    let quenched = env.is_quenched();
    let mut cfg = RunConfig::new(model.clone(), env, urns, colors, horizon, RandomSource::new(seed));
    cfg.snapshot_every = s.snapshot_every;
    cfg.validate().map_err(usage)?;

    fs::create_dir_all(&out).map_err(io(&out))?;
    let trace_path = out.join("trace.jsonl");
    let file = File::create(&trace_path).map_err(io(&trace_path))?;
    let mut writer = JsonlTraceWriter::new(BufWriter::new(file));
    let mut analyzer = RunAnalyzer::new(urns, colors);
    let final_state = run_observed(&cfg, &mut Fanout(vec![&mut writer, &mut analyzer])).map_err(usage)?;
    writer.into_inner().flush().map_err(io(&trace_path))?;

    let fixation = analyzer.fixation.finish(window, &final_state).map_err(|e| CliError::Usage(e.to_string()))?;
    let suitability = analyzer
        .suitability
        .as_ref()
        .map(|t| t.finish(p, tail_fraction, &final_state))
        .transpose()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let alphas = alphas_of(&final_state, 0);
    let nearest = (urns == 2 && colors == 2).then(|| nearest_fixed_point((alphas[0], alphas[1]), p));
    let report = Report {
        model: model.descriptor(),
        p,
        quenched,
        urns,
        colors,
        horizon,
        seed,
        final_counts: final_state.to_rows(),
        alphas,
        fixation,
        suitability,
        nearest_fixed_point: nearest,
    };

    write_pretty(&out.join("report.json"), &report)?;
    write_pretty(&out.join("config.json"), &s)?;
    println!(
        "{}: fixated={} color={} last_deviation_step={}",
        out.display(),
        report.fixation.fixated,
        report.fixation.color.map_or("-".into(), |c| c.to_string()),
        report.fixation.last_deviation_step
    );
    Ok(())
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(io(path))
}
