use serde::{Deserialize, Serialize};

use super::environment::{annealed_indicator, EnvironmentMode};
use super::random::Purpose;
use super::state::UrnState;
use super::trace::{RunMeta, StepObserver, Trace, TraceRecorder};
use super::{Environment, ProcessError, RandomSource};
use crate::weights::WeightModel;

/// Longest run the counter layout of [`RandomSource`] supports.
pub const MAX_HORIZON: u64 = 1 << 31;

/// Default cap on the memory an in-memory trace may take.
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 30;

/// Which transition implementation to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    /// Two-color engine when `colors == 2`, general engine otherwise.
    #[default]
    Auto,
    /// Compares the uniform against `pi(B, W)` directly.
    TwoColor,
    /// Cumulative-interval selection over `draw_probabilities`.
    General,
}

/// Locate `uniform` in the consecutive sub-intervals of `[0, 1)` given by
/// `probs` in color-index order.
pub fn select_color(probs: &[f64], uniform: f64) -> usize {
    let mut acc = 0.0;
    for (c, &p) in probs.iter().enumerate() {
        acc += p;
        if uniform < acc {
            return c;
        }
    }
    // Rounding left the total a hair below 1.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

#[derive(Debug, Default)]
struct Scratch {
    totals: Vec<u64>,
    pooled: Vec<f64>,
    solo: Vec<f64>,
}

impl Scratch {
    fn new(colors: usize) -> Self {
        Scratch {
            totals: vec![0; colors],
            pooled: vec![0.0; colors],
            solo: vec![0.0; colors],
        }
    }
}

/// Draw one color per urn from the frozen `state`. Every urn reads the same
/// time-`n` counts, so the order urns are visited in does not matter.
fn decide(
    state: &UrnState,
    env_row: &[bool],
    uniforms: &[f64],
    model: &WeightModel,
    engine: EngineKind,
    scratch: &mut Scratch,
    out: &mut [u8],
) {
    state.column_totals_into(&mut scratch.totals);
    let two_color = match engine {
        EngineKind::TwoColor => true,
        EngineKind::General => false,
        EngineKind::Auto => state.colors() == 2,
    };
    if two_color {
        let pooled_black = model.pi_two_color(scratch.totals[0], scratch.totals[1]);
        for u in 0..state.urns() {
            let black = if env_row[u] {
                pooled_black
            } else {
                let row = state.row(u);
                model.pi_two_color(row[0], row[1])
            };
            out[u] = if uniforms[u] < black { 0 } else { 1 };
        }
    } else {
        if env_row.iter().any(|&s| s) {
            model.draw_probabilities_into(&scratch.totals, &mut scratch.pooled);
        }
        for u in 0..state.urns() {
            let probs = if env_row[u] {
                &scratch.pooled
            } else {
                model.draw_probabilities_into(state.row(u), &mut scratch.solo);
                &scratch.solo
            };
            out[u] = select_color(probs, uniforms[u]) as u8;
        }
    }
}

/// Draw probability vector urn `u` uses at the frozen `state`.
pub fn urn_probabilities(state: &UrnState, u: usize, shared: bool, model: &WeightModel) -> Vec<f64> {
    if shared {
        model.draw_probabilities(&state.column_totals())
    } else {
        model.draw_probabilities(state.row(u))
    }
}

/// One synchronous transition: every urn draws from the time-`n` state and
/// gains one ball of the drawn color.
pub fn step(
    state: &UrnState,
    env_row: &[bool],
    uniforms: &[f64],
    model: &WeightModel,
) -> (UrnState, Vec<u8>) {
    step_with(state, env_row, uniforms, model, EngineKind::Auto)
}

pub fn step_with(
    state: &UrnState,
    env_row: &[bool],
    uniforms: &[f64],
    model: &WeightModel,
    engine: EngineKind,
) -> (UrnState, Vec<u8>) {
    assert_eq!(env_row.len(), state.urns());
    assert_eq!(uniforms.len(), state.urns());
    let mut scratch = Scratch::new(state.colors());
    let mut drawn = vec![0u8; state.urns()];
    decide(state, env_row, uniforms, model, engine, &mut scratch, &mut drawn);
    let mut next = state.clone();
    next.apply(&drawn);
    (next, drawn)
}

/// Everything needed to reproduce one realisation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: WeightModel,
    pub env: Environment,
    pub urns: usize,
    pub colors: usize,
    pub horizon: u64,
    pub source: RandomSource,
    pub snapshot_every: Option<u64>,
    pub engine: EngineKind,
    /// Bytes an in-memory [`Trace`] may occupy before [`run`] refuses.
    pub memory_budget: usize,
}

impl RunConfig {
    pub fn new(
        model: WeightModel,
        env: Environment,
        urns: usize,
        colors: usize,
        horizon: u64,
        source: RandomSource,
    ) -> Self {
        RunConfig {
            model,
            env,
            urns,
            colors,
            horizon,
            source,
            snapshot_every: None,
            engine: EngineKind::Auto,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<(), ProcessError> {
        if self.urns == 0 {
            return Err(ProcessError::NoUrns);
        }
        if self.horizon == 0 {
            return Err(ProcessError::ZeroHorizon);
        }
        if self.horizon > MAX_HORIZON {
            return Err(ProcessError::HorizonTooLong(self.horizon));
        }
        if self.colors < 2 {
            return Err(ProcessError::TooFewColors(self.colors));
        }
        if self.colors > u8::MAX as usize + 1 {
            return Err(ProcessError::TooManyColors(self.colors));
        }
        if self.engine == EngineKind::TwoColor && self.colors != 2 {
            return Err(ProcessError::EngineMismatch(self.colors));
        }
        if self.snapshot_every == Some(0) {
            return Err(ProcessError::Dimension("snapshot interval must be >= 1".into()));
        }
        if let EnvironmentMode::Quenched(m) = self.env.mode() {
            if m.horizon() != self.horizon || m.urns() != self.urns {
                return Err(ProcessError::Dimension(format!(
                    "environment is {}x{}, run needs {}x{}",
                    m.horizon(),
                    m.urns(),
                    self.horizon,
                    self.urns
                )));
            }
        }
        Ok(())
    }

    pub fn meta(&self) -> RunMeta {
        RunMeta {
            seed: self.source.seed,
            grid: self.source.grid,
            replication: self.source.replication,
            model: self.model.clone(),
            p: self.env.p(),
            quenched: self.env.is_quenched(),
            urns: self.urns,
            colors: self.colors,
            horizon: self.horizon,
        }
    }

    /// Bytes an in-memory trace of this run needs.
    pub fn trace_bytes(&self) -> usize {
        (self.horizon as usize)
            .saturating_mul(self.urns)
            .saturating_mul(std::mem::size_of::<u8>() + std::mem::size_of::<bool>())
    }
}

/// Run from the empty state, handing every step to `obs`. Nothing is
/// retained besides the returned final state.
pub fn run_observed(cfg: &RunConfig, obs: &mut dyn StepObserver) -> Result<UrnState, ProcessError> {
    cfg.validate()?;
    let urns = cfg.urns;
    let mut state = UrnState::empty(urns, cfg.colors);
    let mut scratch = Scratch::new(cfg.colors);
    let mut draw_stream = cfg.source.reader(Purpose::Draw);
    let mut env_stream = cfg.source.reader(Purpose::Environment);
    let mut uniforms = vec![0.0; urns];
    let mut env_uniforms = vec![0.0; urns];
    let mut env_row = vec![false; urns];
    let mut drawn = vec![0u8; urns];
    let p = cfg.env.p();

    for n in 0..cfg.horizon {
        match cfg.env.mode() {
            EnvironmentMode::Quenched(m) => env_row.copy_from_slice(m.row(n)),
            EnvironmentMode::Annealed => {
                env_stream.fill_row(n, &mut env_uniforms);
                for (s, &v) in env_row.iter_mut().zip(&env_uniforms) {
                    *s = annealed_indicator(v, p);
                }
            }
        }
        draw_stream.fill_row(n, &mut uniforms);
        decide(&state, &env_row, &uniforms, &cfg.model, cfg.engine, &mut scratch, &mut drawn);
        state.apply(&drawn);
        obs.on_step(n, &drawn, &env_row, &state)?;
        if let Some(every) = cfg.snapshot_every {
            if state.n().is_multiple_of(every) {
                state.check_invariants()?;
                obs.on_snapshot(&state)?;
            }
        }
    }
    Ok(state)
}

/// Run and keep the whole trace in memory. Refuses runs whose trace would
/// exceed `cfg.memory_budget`; use [`run_observed`] with a streaming
/// observer for those.
pub fn run(cfg: &RunConfig) -> Result<Trace, ProcessError> {
    cfg.validate()?;
    let needed = cfg.trace_bytes();
    if needed > cfg.memory_budget {
        return Err(ProcessError::TraceTooLarge {
            needed,
            budget: cfg.memory_budget,
        });
    }
    let mut rec = TraceRecorder::with_capacity(cfg.horizon as usize * cfg.urns);
    run_observed(cfg, &mut rec)?;
    rec.finish(cfg.meta())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{sample_environment, IndicatorMatrix};
    use proptest::prelude::*;

    fn exp2() -> WeightModel {
        WeightModel::exponential(2.0).unwrap()
    }

    #[test]
    fn empty_state_draws_black_below_half() {
        let s = UrnState::empty(2, 2);
        for env in [[true, false], [false, true]] {
            let (_, c) = step(&s, &env, &[0.4999, 0.5], &exp2());
            assert_eq!(c, vec![0, 1]);
        }
    }

    #[test]
    fn solo_and_shared_examples() {
        let s = UrnState::from_rows(vec![vec![3, 0], vec![0, 3]]).unwrap();
        let (next, c) = step(&s, &[false, false], &[0.8, 0.8], &exp2());
        assert_eq!(c, vec![0, 1]);
        assert_eq!(next.to_rows(), vec![vec![4, 0], vec![0, 4]]);
        let (_, c) = step(&s, &[true, false], &[0.8, 0.8], &exp2());
        assert_eq!(c[0], 1);
        // Same with the general engine.
        let (_, c) = step_with(&s, &[true, false], &[0.8, 0.8], &exp2(), EngineKind::General);
        assert_eq!(c, vec![1, 1]);
    }

    #[test]
    fn select_color_intervals() {
        let probs = [0.25, 0.5, 0.25];
        assert_eq!(select_color(&probs, 0.0), 0);
        assert_eq!(select_color(&probs, 0.2499), 0);
        assert_eq!(select_color(&probs, 0.25), 1);
        assert_eq!(select_color(&probs, 0.75), 2);
        assert_eq!(select_color(&[0.3, 0.7 - 1e-16, 0.0], 0.999_999_999_999_999_9), 1);
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = RunConfig::new(exp2(), Environment::annealed(0.3).unwrap(), 3, 2, 500, RandomSource::new(99));
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }

    #[test]
    fn snapshots_do_not_shift_the_stream() {
        let mut cfg = RunConfig::new(exp2(), Environment::annealed(0.6).unwrap(), 4, 3, 300, RandomSource::new(5));
        let plain = run(&cfg).unwrap();
        cfg.snapshot_every = Some(7);
        let snapped = run(&cfg).unwrap();
        assert_eq!(plain.draws(), snapped.draws());
        assert_eq!(snapped.snapshots().len(), 300 / 7);
        for s in snapped.snapshots() {
            s.check_invariants().unwrap();
        }
    }

    #[test]
    fn annealed_equals_quenched_on_sampled_environment() {
        let src = RandomSource::with_key(3, 1, 4);
        let annealed = RunConfig::new(exp2(), Environment::annealed(0.45).unwrap(), 3, 2, 400, src);
        let env = sample_environment(0.45, 3, 400, &src).unwrap();
        let quenched = RunConfig::new(exp2(), env, 3, 2, 400, src);
        let a = run(&annealed).unwrap();
        let q = run(&quenched).unwrap();
        assert_eq!(a.draws(), q.draws());
        assert_eq!(a.env(), q.env());
    }

    #[test]
    fn pooled_probabilities_when_all_shared() {
        let cfg = RunConfig::new(
            exp2(),
            Environment::quenched(1.0, IndicatorMatrix::constant(200, 3, true)).unwrap(),
            3,
            2,
            200,
            RandomSource::new(1),
        );
        let trace = run(&cfg).unwrap();
        let mut state = UrnState::empty(3, 2);
        for n in 0..trace.horizon() {
            let probs: Vec<Vec<f64>> = (0..3).map(|u| urn_probabilities(&state, u, true, &exp2())).collect();
            assert!(probs.windows(2).all(|w| w[0] == w[1]));
            state.apply(trace.step_colors(n));
        }
    }

    #[test]
    fn two_color_and_general_engines_agree() {
        for seed in 0..5 {
            let mut cfg = RunConfig::new(exp2(), Environment::annealed(0.5).unwrap(), 4, 2, 1000, RandomSource::new(seed));
            cfg.engine = EngineKind::TwoColor;
            let a = run(&cfg).unwrap();
            cfg.engine = EngineKind::General;
            let b = run(&cfg).unwrap();
            assert_eq!(a.draws(), b.draws());
        }
    }

    #[test]
    fn replay_reproduces_final_state() {
        let cfg = RunConfig::new(exp2(), Environment::annealed(0.8).unwrap(), 4, 2, 2000, RandomSource::new(17));
        let trace = run(&cfg).unwrap();
        trace.final_state().check_invariants().unwrap();
        assert_eq!(trace.final_state().n(), 2000);
        assert_eq!(&trace.replay(), trace.final_state());
    }

    #[test]
    fn invalid_configs_rejected() {
        let env = Environment::annealed(0.5).unwrap();
        let base = RunConfig::new(exp2(), env.clone(), 2, 2, 10, RandomSource::new(0));
        let mut c = base.clone();
        c.urns = 0;
        assert!(matches!(run(&c), Err(ProcessError::NoUrns)));
        let mut c = base.clone();
        c.horizon = 0;
        assert!(matches!(run(&c), Err(ProcessError::ZeroHorizon)));
        let mut c = base.clone();
        c.colors = 3;
        c.engine = EngineKind::TwoColor;
        assert!(matches!(run(&c), Err(ProcessError::EngineMismatch(3))));
        let mut c = base.clone();
        c.env = Environment::quenched(0.5, IndicatorMatrix::constant(5, 2, true)).unwrap();
        assert!(matches!(run(&c), Err(ProcessError::Dimension(_))));
        let mut c = base;
        c.horizon = 1000;
        c.memory_budget = 100;
        assert!(matches!(run(&c), Err(ProcessError::TraceTooLarge { needed: 4000, budget: 100 })));
        // The streaming path ignores the budget.
        struct Count(u64);
        impl StepObserver for Count {
            fn on_step(&mut self, _: u64, _: &[u8], _: &[bool], _: &UrnState) -> Result<(), ProcessError> {
                self.0 += 1;
                Ok(())
            }
        }
        let mut count = Count(0);
        run_observed(&c, &mut count).unwrap();
        assert_eq!(count.0, 1000);
    }

    fn arb_state() -> impl Strategy<Value = (usize, usize, Vec<Vec<u64>>)> {
        (1usize..6, 2usize..5, 0u64..40).prop_flat_map(|(urns, colors, n)| {
            let row = prop::collection::vec(0u64..=n, colors - 1).prop_map(move |mut cuts| {
                cuts.sort();
                let mut row = Vec::with_capacity(colors);
                let mut prev = 0;
                for c in cuts {
                    row.push(c - prev);
                    prev = c;
                }
                row.push(n - prev);
                row
            });
            (Just(urns), Just(colors), prop::collection::vec(row, urns))
        })
    }

    proptest! {
        #[test]
        fn urn_order_is_irrelevant(
            (urns, _colors, rows) in arb_state(),
            seed in any::<u64>(),
            shuffle in any::<u64>(),
        ) {
            let model = WeightModel::exponential(1.7).unwrap();
            let state = UrnState::from_rows(rows).unwrap();
            let src = RandomSource::new(seed);
            let uniforms: Vec<f64> = (0..urns).map(|u| src.uniform(Purpose::Draw, 0, u)).collect();
            let env: Vec<bool> = (0..urns).map(|u| src.uniform(Purpose::Environment, 0, u) < 0.5).collect();
            let (_, drawn) = step_with(&state, &env, &uniforms, &model, EngineKind::General);
            // Visit urns in a scrambled order, one urn at a time.
            let mut order: Vec<usize> = (0..urns).collect();
            let mut s = shuffle;
            for i in (1..urns).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            for u in order {
                let probs = urn_probabilities(&state, u, env[u], &model);
                prop_assert_eq!(select_color(&probs, uniforms[u]) as u8, drawn[u]);
            }
        }

        #[test]
        fn every_urn_gains_one_ball((urns, colors, rows) in arb_state(), seed in any::<u64>()) {
            let state = UrnState::from_rows(rows).unwrap();
            let src = RandomSource::new(seed);
            let uniforms: Vec<f64> = (0..urns).map(|u| src.uniform(Purpose::Draw, 0, u)).collect();
            let env = vec![false; urns];
            let (next, drawn) = step(&state, &env, &uniforms, &exp2());
            next.check_invariants().unwrap();
            prop_assert_eq!(next.n(), state.n() + 1);
            prop_assert!(drawn.iter().all(|&c| (c as usize) < colors));
        }
    }
}
