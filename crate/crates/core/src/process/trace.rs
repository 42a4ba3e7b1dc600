use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::state::UrnState;
use super::ProcessError;
use crate::weights::WeightModel;

/// Identifies a single realisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seed: u64,
    pub grid: u64,
    pub replication: u64,
    pub model: WeightModel,
    pub p: f64,
    pub quenched: bool,
    pub urns: usize,
    pub colors: usize,
    pub horizon: u64,
}

/// Receives each step of a run as it is produced.
///
/// Step `n` (0-based) draws from the time-`n` state and produces the
/// time-`n + 1` state, which is passed as `after`.
pub trait StepObserver {
    fn on_step(
        &mut self,
        n: u64,
        colors: &[u8],
        env: &[bool],
        after: &UrnState,
    ) -> Result<(), ProcessError>;

    fn on_snapshot(&mut self, _state: &UrnState) -> Result<(), ProcessError> {
        Ok(())
    }
}

/// Forwards every callback to each observer in turn.
pub struct Fanout<'a>(pub Vec<&'a mut dyn StepObserver>);

impl StepObserver for Fanout<'_> {
    fn on_step(
        &mut self,
        n: u64,
        colors: &[u8],
        env: &[bool],
        after: &UrnState,
    ) -> Result<(), ProcessError> {
        for o in self.0.iter_mut() {
            o.on_step(n, colors, env, after)?;
        }
        Ok(())
    }

    fn on_snapshot(&mut self, state: &UrnState) -> Result<(), ProcessError> {
        for o in self.0.iter_mut() {
            o.on_snapshot(state)?;
        }
        Ok(())
    }
}

/// Drawn colors and environment of a whole run, kept in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    meta: RunMeta,
    draws: Vec<u8>,
    env: Vec<bool>,
    snapshots: Vec<UrnState>,
    final_state: UrnState,
}

impl Trace {
    /// Assemble a trace from flat row-major `draws` and `env` of
    /// `meta.horizon` rows. The final state is rebuilt by replay.
    pub fn from_parts(meta: RunMeta, draws: Vec<u8>, env: Vec<bool>) -> Result<Self, ProcessError> {
        Self::with_snapshots(meta, draws, env, Vec::new())
    }

    pub(crate) fn with_snapshots(
        meta: RunMeta,
        draws: Vec<u8>,
        env: Vec<bool>,
        snapshots: Vec<UrnState>,
    ) -> Result<Self, ProcessError> {
        if meta.urns == 0 {
            return Err(ProcessError::NoUrns);
        }
        if meta.horizon == 0 {
            return Err(ProcessError::ZeroHorizon);
        }
        let cells = meta.horizon as usize * meta.urns;
        if draws.len() != cells || env.len() != cells {
            return Err(ProcessError::Dimension(format!(
                "trace holds {} draws and {} indicators, expected {cells}",
                draws.len(),
                env.len()
            )));
        }
        if let Some(&bad) = draws.iter().find(|&&c| c as usize >= meta.colors) {
            return Err(ProcessError::Dimension(format!(
                "color {bad} out of range for {} colors",
                meta.colors
            )));
        }
        let mut trace = Trace {
            final_state: UrnState::empty(meta.urns, meta.colors),
            meta,
            draws,
            env,
            snapshots,
        };
        trace.final_state = trace.replay();
        Ok(trace)
    }

    pub fn meta(&self) -> &RunMeta {
        &self.meta
    }

    pub fn horizon(&self) -> u64 {
        self.meta.horizon
    }

    pub fn urns(&self) -> usize {
        self.meta.urns
    }

    pub fn colors(&self) -> usize {
        self.meta.colors
    }

    pub fn step_colors(&self, n: u64) -> &[u8] {
        let s = n as usize * self.meta.urns;
        &self.draws[s..s + self.meta.urns]
    }

    pub fn step_env(&self, n: u64) -> &[bool] {
        let s = n as usize * self.meta.urns;
        &self.env[s..s + self.meta.urns]
    }

    pub fn draws(&self) -> &[u8] {
        &self.draws
    }

    pub fn env(&self) -> &[bool] {
        &self.env
    }

    pub fn snapshots(&self) -> &[UrnState] {
        &self.snapshots
    }

    pub fn final_state(&self) -> &UrnState {
        &self.final_state
    }

    /// Rebuild the counts from the drawn colors alone, starting empty.
    pub fn replay(&self) -> UrnState {
        let mut state = UrnState::empty(self.meta.urns, self.meta.colors);
        for n in 0..self.meta.horizon {
            state.apply(self.step_colors(n));
        }
        state
    }

    /// Feed the recorded steps to an observer as if the run were live.
    pub fn feed(&self, obs: &mut dyn StepObserver) -> Result<(), ProcessError> {
        let mut state = UrnState::empty(self.meta.urns, self.meta.colors);
        for n in 0..self.meta.horizon {
            state.apply(self.step_colors(n));
            obs.on_step(n, self.step_colors(n), self.step_env(n), &state)?;
        }
        Ok(())
    }
}

/// Observer that keeps the full trace in memory.
#[derive(Debug, Default)]
pub struct TraceRecorder {
    draws: Vec<u8>,
    env: Vec<bool>,
    snapshots: Vec<UrnState>,
}

impl TraceRecorder {
    pub fn with_capacity(cells: usize) -> Self {
        TraceRecorder {
            draws: Vec::with_capacity(cells),
            env: Vec::with_capacity(cells),
            snapshots: Vec::new(),
        }
    }

    pub fn finish(self, meta: RunMeta) -> Result<Trace, ProcessError> {
        Trace::with_snapshots(meta, self.draws, self.env, self.snapshots)
    }
}

impl StepObserver for TraceRecorder {
    fn on_step(&mut self, _n: u64, colors: &[u8], env: &[bool], _: &UrnState) -> Result<(), ProcessError> {
        self.draws.extend_from_slice(colors);
        self.env.extend_from_slice(env);
        Ok(())
    }

    fn on_snapshot(&mut self, state: &UrnState) -> Result<(), ProcessError> {
        self.snapshots.push(state.clone());
        Ok(())
    }
}

#[derive(Serialize)]
struct StepLineOut<'a> {
    n: u64,
    colors: &'a [u8],
    env: Vec<u8>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TraceLine {
    Step { n: u64, colors: Vec<u8>, env: Vec<u8> },
    Snapshot(UrnState),
}

/// Streams a run as line-delimited JSON: one
/// `{"n": .., "colors": [..], "env": [0|1, ..]}` record per step and one
/// `{"n": .., "counts": [[..], ..]}` record per snapshot (snapshot `n` is the
/// state time, i.e. the number of balls per urn).
pub struct JsonlTraceWriter<W: Write> {
    out: W,
}

impl<W: Write> JsonlTraceWriter<W> {
    pub fn new(out: W) -> Self {
        JsonlTraceWriter { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> StepObserver for JsonlTraceWriter<W> {
    fn on_step(&mut self, n: u64, colors: &[u8], env: &[bool], _: &UrnState) -> Result<(), ProcessError> {
        let line = StepLineOut {
            n,
            colors,
            env: env.iter().map(|&s| s as u8).collect(),
        };
        serde_json::to_writer(&mut self.out, &line).map_err(std::io::Error::from)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    fn on_snapshot(&mut self, state: &UrnState) -> Result<(), ProcessError> {
        serde_json::to_writer(&mut self.out, state).map_err(std::io::Error::from)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }
}

/// Replay a JSONL trace into an observer without materialising it.
/// Returns the number of step records seen.
pub fn replay_jsonl<R: BufRead>(
    reader: R,
    urns: usize,
    colors: usize,
    obs: &mut dyn StepObserver,
) -> Result<u64, ProcessError> {
    let mut state = UrnState::empty(urns, colors);
    let mut steps = 0u64;
    let mut env_row = vec![false; urns];
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceLine = serde_json::from_str(&line).map_err(|e| ProcessError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        match rec {
            TraceLine::Step { n, colors: drawn, env } => {
                let bad = |message: String| ProcessError::Parse {
                    line: line_no,
                    message,
                };
                if n != steps {
                    return Err(bad(format!("expected step {steps}, found {n}")));
                }
                if drawn.len() != urns || env.len() != urns {
                    return Err(bad(format!("expected {urns} urns")));
                }
                if drawn.iter().any(|&c| c as usize >= colors) {
                    return Err(bad(format!("color out of range for {colors} colors")));
                }
                for (slot, &x) in env_row.iter_mut().zip(&env) {
                    *slot = match x {
                        0 => false,
                        1 => true,
                        _ => return Err(bad(format!("environment value {x} is not 0 or 1"))),
                    };
                }
                state.apply(&drawn);
                obs.on_step(n, &drawn, &env_row, &state)?;
                steps += 1;
            }
            TraceLine::Snapshot(snap) => {
                if snap != state {
                    return Err(ProcessError::Parse {
                        line: line_no,
                        message: format!("snapshot at n = {} disagrees with replayed counts", snap.n()),
                    });
                }
                obs.on_snapshot(&snap)?;
            }
        }
    }
    Ok(steps)
}

/// Load a JSONL trace written by [`JsonlTraceWriter`].
pub fn read_trace_jsonl<R: BufRead>(reader: R, mut meta: RunMeta) -> Result<Trace, ProcessError> {
    let mut rec = TraceRecorder::default();
    let steps = replay_jsonl(reader, meta.urns, meta.colors, &mut rec)?;
    meta.horizon = steps;
    rec.finish(meta)
}
