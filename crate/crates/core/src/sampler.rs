//! The outer sampling loop: rank, solve, verify stability, accumulate, and
//! stop on convergence, stagnation, trial exhaustion or unsatisfiability.

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::diffbranch::{beta_for, rebuild_ranking, CostSpec, DiffBranch, SingularityError, DEFAULT_NOISE};
use crate::engine::{ActivityBranching, BranchingHeuristic, Engine, EngineConfig, EngineError, EngineStats, Outcome};
use crate::model::{Atom, Model, Nogood, NogoodOrigin, SampleAccumulator};
use crate::stability::{extract_model, needs_check, StabilityChecker};
use crate::transform::CompiledInstance;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Accuracy threshold: sampling may stop once the cost is at most this.
    pub psi: f64,
    /// Minimum sample size before convergence counts.
    pub min_models: u64,
    pub noise: f64,
    /// Inner solves allowed, rejected unstable candidates included.
    pub max_trials: u64,
    /// `(window, eps)`: stop when the best cost of the last window improves
    /// on the best cost of the window before by less than `eps`.
    pub stagnation: Option<(u64, f64)>,
    pub seed: u64,
    pub portfolio_width: usize,
    /// Closed-form MSE partials.
    pub fast_mse: bool,
    /// Recompute the ranking at every decision instead of once per model.
    pub lookahead: bool,
    pub engine: EngineConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            psi: 0.01,
            min_models: 0,
            noise: DEFAULT_NOISE,
            max_trials: 1_000_000,
            stagnation: None,
            seed: 0,
            portfolio_width: 1,
            fast_mse: false,
            lookahead: false,
            engine: EngineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    Converged,
    Stagnated,
    TrialsExhausted,
    Unsat,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminationReason::Converged => "converged",
            TerminationReason::Stagnated => "stagnated",
            TerminationReason::TrialsExhausted => "trials_exhausted",
            TerminationReason::Unsat => "unsat",
        })
    }
}

#[derive(Debug, Clone)]
pub struct SampleResult {
    pub sample: SampleAccumulator,
    /// Cost of the final sample; 0 without a cost function, and for an
    /// empty sample the cost at the all-zero frequency vector.
    pub final_cost: f64,
    pub reason: TerminationReason,
    pub models_generated: u64,
    pub trials: u64,
    pub loop_nogoods: u64,
    /// Wall time spent producing each model.
    pub model_times: Vec<Duration>,
    pub engine_stats: EngineStats,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("cost is undefined for the final sample: {0}")]
    Singular(SingularityError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// One sampling run: an engine plus the sample it builds.
struct Run<'a> {
    instance: &'a CompiledInstance,
    cost: Option<Arc<CostSpec>>,
    config: &'a SamplerConfig,
    engine: Engine,
    checker: Option<StabilityChecker>,
    acc: SampleAccumulator,
    trials: u64,
    loop_nogoods: u64,
}

enum Step {
    Model(Vec<bool>),
    Unsat,
    OutOfTrials,
}

impl<'a> Run<'a> {
    fn new(instance: &'a CompiledInstance, cost: Option<Arc<CostSpec>>, config: &'a SamplerConfig, engine: Engine) -> Self {
        let params = match &cost {
            Some(c) => c.params().to_vec(),
            None => instance.params.clone(),
        };
        Run {
            instance,
            cost,
            config,
            engine,
            checker: needs_check(instance).then(|| StabilityChecker::new(instance)),
            acc: SampleAccumulator::new(params),
            trials: 0,
            loop_nogoods: 0,
        }
    }

    fn heuristic(&self) -> Box<dyn BranchingHeuristic> {
        match &self.cost {
            None => Box::new(ActivityBranching),
            Some(c) if self.config.lookahead => Box::new(DiffBranch::with_lookahead(c.clone(), &self.acc, self.config.noise)),
            Some(c) => Box::new(DiffBranch::new(Arc::new(rebuild_ranking(c, &self.acc)), self.config.noise)),
        }
    }

    /// Solves until a stable model is found, adding loop nogoods for every
    /// rejected candidate.
    fn next_model(&mut self, cancel: Option<&AtomicBool>) -> Result<Step, EngineError> {
        let mut heuristic = self.heuristic();
        loop {
            if self.trials >= self.config.max_trials {
                return Ok(Step::OutOfTrials);
            }
            self.trials += 1;
            match self.engine.solve_one_cancellable(heuristic.as_mut(), cancel)? {
                Outcome::Unsat => return Ok(Step::Unsat),
                Outcome::Model(values) => {
                    if let Some(checker) = &self.checker {
                        let (stable, r) = checker.check(self.instance, &values);
                        if !stable {
                            let ngs = crate::stability::loop_nogoods(self.instance, &r.unfounded, &values);
                            debug_assert!(ngs.iter().any(|g| g.violated_by(|a: Atom| values[a.slot()])));
                            self.loop_nogoods += ngs.len() as u64;
                            for g in &ngs {
                                self.engine.add_nogood(g);
                            }
                            continue;
                        }
                    }
                    return Ok(Step::Model(values));
                }
            }
        }
    }

    fn cost_now(&self) -> Option<Result<f64, SingularityError>> {
        let c = self.cost.as_ref()?;
        Some(c.eval_cost(&beta_for(c, &self.acc)))
    }

    fn finish(self, reason: TerminationReason, model_times: Vec<Duration>) -> Result<SampleResult, SamplerError> {
        let final_cost = match self.cost_now() {
            None => 0.0,
            Some(Ok(c)) => c,
            Some(Err(e)) => return Err(SamplerError::Singular(e)),
        };
        Ok(SampleResult {
            models_generated: self.acc.size(),
            sample: self.acc,
            final_cost,
            reason,
            trials: self.trials,
            loop_nogoods: self.loop_nogoods,
            model_times,
            engine_stats: self.engine.stats(),
        })
    }

    /// The main loop, starting from `first` if a model is already known.
    fn drive(mut self, first: Option<(Step, Duration)>) -> Result<SampleResult, SamplerError> {
        let mut times = Vec::new();
        let mut history: Vec<f64> = Vec::new();
        let mut pending = first;
        loop {
            let (step, elapsed) = match pending.take() {
                Some(s) => s,
                None => {
                    let start = Instant::now();
                    let step = self.next_model(None).unwrap_or(Step::OutOfTrials);
                    (step, start.elapsed())
                }
            };
            let values = match step {
                Step::Unsat => return self.finish(TerminationReason::Unsat, times),
                Step::OutOfTrials => return self.finish(TerminationReason::TrialsExhausted, times),
                Step::Model(v) => v,
            };
            times.push(elapsed);
            self.acc.add_model(extract_model(self.instance, &values));

            let cost = match self.cost_now() {
                None => return self.finish(TerminationReason::Converged, times),
                Some(c) => c,
            };
            let cost = cost.unwrap_or(f64::INFINITY);
            if cost <= self.config.psi && self.acc.size() >= self.config.min_models {
                return self.finish(TerminationReason::Converged, times);
            }
            history.push(cost);
            if let Some((window, eps)) = self.config.stagnation {
                if stagnated(&history, window, eps) {
                    return self.finish(TerminationReason::Stagnated, times);
                }
            }
        }
    }
}

/// True at a window boundary when the best cost of the latest window is
/// less than `eps` below the best cost of the window before it.
pub fn stagnated(history: &[f64], window: u64, eps: f64) -> bool {
    let w = window.max(1) as usize;
    let n = history.len();
    if n < 2 * w || !n.is_multiple_of(w) {
        return false;
    }
    let best = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    let previous = best(&history[n - 2 * w..n - w]);
    let current = best(&history[n - w..]);
    if previous.is_infinite() && current.is_infinite() {
        return true;
    }
    previous - current < eps
}

fn engine_config(config: &SamplerConfig, seed: u64, diversify: bool) -> EngineConfig {
    EngineConfig {
        seed,
        randomize_activities: diversify || config.engine.randomize_activities,
        ..config.engine.clone()
    }
}

fn check_config(config: &SamplerConfig) -> Result<(), SamplerError> {
    if config.psi.is_nan() || config.psi < 0.0 {
        return Err(SamplerError::Config(format!("psi must be non-negative, got {}", config.psi)));
    }
    if !(0.0..1.0).contains(&config.noise) {
        return Err(SamplerError::Config(format!("noise must be in [0,1), got {}", config.noise)));
    }
    if config.max_trials == 0 {
        return Err(SamplerError::Config("max trials must be positive".into()));
    }
    if config.portfolio_width == 0 {
        return Err(SamplerError::Config("portfolio width must be positive".into()));
    }
    Ok(())
}

/// Samples models until the cost reaches `psi` (or another stop condition
/// holds). Without a cost function this returns after one model.
pub fn run_sampling(instance: &CompiledInstance, cost: Option<&CostSpec>, config: &SamplerConfig) -> Result<SampleResult, SamplerError> {
    check_config(config)?;
    let cost = cost.map(|c| {
        let mut c = c.clone();
        c.set_fast_mse(config.fast_mse);
        Arc::new(c)
    });
    let engine = Engine::new(instance, engine_config(config, config.seed, false));
    Run::new(instance, cost, config, engine).drive(None)
}

/// Like [`run_sampling`], but the first model is raced by
/// `portfolio_width` engines with seeds `seed, seed + 1, ...`; the winner
/// continues alone.
pub fn run_portfolio(instance: &CompiledInstance, cost: Option<&CostSpec>, config: &SamplerConfig) -> Result<SampleResult, SamplerError> {
    check_config(config)?;
    if config.portfolio_width <= 1 {
        return run_sampling(instance, cost, config);
    }
    let cost = cost.map(|c| {
        let mut c = c.clone();
        c.set_fast_mse(config.fast_mse);
        Arc::new(c)
    });
    let cancel = AtomicBool::new(false);
    let winner: Mutex<Option<(Run, Step, Duration)>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for i in 0..config.portfolio_width {
            let cost = cost.clone();
            let (cancel, winner) = (&cancel, &winner);
            scope.spawn(move || {
                let start = Instant::now();
                let engine = Engine::new(instance, engine_config(config, config.seed.wrapping_add(i as u64), i > 0));
                let mut run = Run::new(instance, cost, config, engine);
                if let Ok(step) = run.next_model(Some(cancel)) {
                    let mut slot = winner.lock().unwrap();
                    if slot.is_none() {
                        cancel.store(true, Ordering::Relaxed);
                        *slot = Some((run, step, start.elapsed()));
                    }
                }
            });
        }
    });
    let (run, step, elapsed) = winner.into_inner().unwrap().expect("some portfolio member finishes");
    run.drive(Some((step, elapsed)))
}

/// All models (stable models in ASP mode), found by repeated solving with
/// blocking nogoods over the visible atoms. Sorted.
pub fn enumerate_all(instance: &CompiledInstance, config: &EngineConfig) -> Vec<Model> {
    let sampler_config = SamplerConfig {
        engine: config.clone(),
        max_trials: u64::MAX,
        ..SamplerConfig::default()
    };
    let engine = Engine::new(instance, config.clone());
    let mut run = Run::new(instance, None, &sampler_config, engine);
    let mut out = Vec::new();
    while let Ok(Step::Model(values)) = run.next_model(None) {
        out.push(extract_model(instance, &values));
        let block: Vec<_> = (0..values.len())
            .map(Atom::from_slot)
            .filter(|&a| instance.is_visible(a))
            .map(|a| crate::model::Lit::new(a, values[a.slot()]))
            .collect();
        match Nogood::new(block, NogoodOrigin::Blocking) {
            Some(g) => run.engine.add_nogood(&g),
            None => break,
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_ground_asp;
    use crate::infer::program_cost;
    use crate::transform::compile;

    fn setup(src: &str) -> (CompiledInstance, Option<CostSpec>) {
        let (p, c) = parse_ground_asp(src).unwrap();
        let cost = program_cost(&p, c.as_ref());
        (compile(&p), cost)
    }

    #[test]
    fn loose_threshold_gives_one_model() {
        let (inst, cost) = setup("0.2 :: a. 0.6 :: b. :- a, b.");
        let config = SamplerConfig {
            psi: 1e9,
            min_models: 1,
            ..SamplerConfig::default()
        };
        let r = run_sampling(&inst, cost.as_ref(), &config).unwrap();
        assert_eq!(r.models_generated, 1);
        assert_eq!(r.reason, TerminationReason::Converged);
    }

    #[test]
    fn unsat_instance() {
        let (inst, cost) = setup("0.5 :: a. :- a. :- not a.");
        let r = run_sampling(&inst, cost.as_ref(), &SamplerConfig::default()).unwrap();
        assert_eq!(r.reason, TerminationReason::Unsat);
        assert!(r.sample.is_empty());
    }

    #[test]
    fn worked_example_converges() {
        let (inst, cost) = setup("0.2 :: a. 0.6 :: b. :- a, b.");
        let config = SamplerConfig {
            psi: 0.001,
            seed: 1,
            ..SamplerConfig::default()
        };
        let r = run_sampling(&inst, cost.as_ref(), &config).unwrap();
        assert_eq!(r.reason, TerminationReason::Converged);
        assert!(r.final_cost <= 0.001);
        let beta = r.sample.beta();
        assert!((beta[0] - 0.2).abs() <= 0.045 && (beta[1] - 0.6).abs() <= 0.045);
    }

    #[test]
    fn plain_mode_returns_one_model() {
        let (inst, cost) = setup("{a}. {b}. :- a, b.");
        assert!(cost.is_none());
        let r = run_sampling(&inst, None, &SamplerConfig::default()).unwrap();
        assert_eq!(r.models_generated, 1);
        assert_eq!(r.reason, TerminationReason::Converged);
        assert_eq!(r.final_cost, 0.0);
    }

    #[test]
    fn infeasible_weights_stop_without_convergence() {
        let (inst, cost) = setup("0.9 :: a. 0.9 :: b. :- a, b.");
        let config = SamplerConfig {
            psi: 0.001,
            max_trials: 2000,
            ..SamplerConfig::default()
        };
        let r = run_sampling(&inst, cost.as_ref(), &config).unwrap();
        assert_eq!(r.reason, TerminationReason::TrialsExhausted);
        assert!(r.final_cost > 0.01);
        let config = SamplerConfig {
            psi: 0.001,
            stagnation: Some((100, 1e-4)),
            ..SamplerConfig::default()
        };
        let r = run_sampling(&inst, cost.as_ref(), &config).unwrap();
        assert_eq!(r.reason, TerminationReason::Stagnated);
        assert!(r.final_cost > 0.01);
    }

    #[test]
    fn final_cost_matches_recomputation() {
        let (inst, cost) = setup("0.3 :: a. 0.7 :: b. 0.5 :: c. :- a, b, c.");
        let cost = cost.unwrap();
        let config = SamplerConfig {
            psi: 0.0005,
            seed: 9,
            ..SamplerConfig::default()
        };
        let r = run_sampling(&inst, Some(&cost), &config).unwrap();
        assert_eq!(r.sample.counts(), r.sample.recount().as_slice());
        assert_eq!(r.final_cost, cost.eval_cost(&r.sample.beta()).unwrap());
    }

    #[test]
    fn same_seed_same_sample() {
        let (inst, cost) = setup("0.3 :: a. 0.45 :: b. 0.5 :: c. :- a, b.");
        let config = SamplerConfig {
            psi: 0.0001,
            seed: 5,
            noise: 0.2,
            ..SamplerConfig::default()
        };
        let r1 = run_sampling(&inst, cost.as_ref(), &config).unwrap();
        let r2 = run_sampling(&inst, cost.as_ref(), &config).unwrap();
        assert_eq!(r1.sample.models(), r2.sample.models());
    }

    #[test]
    fn fast_mse_gives_identical_samples() {
        let (inst, cost) = setup("0.3 :: a. 0.45 :: b. 0.5 :: c. :- a, b.");
        let config = SamplerConfig {
            psi: 0.0001,
            seed: 5,
            ..SamplerConfig::default()
        };
        let fast = SamplerConfig {
            fast_mse: true,
            ..config.clone()
        };
        let r1 = run_sampling(&inst, cost.as_ref(), &config).unwrap();
        let r2 = run_sampling(&inst, cost.as_ref(), &fast).unwrap();
        assert_eq!(r1.sample.models(), r2.sample.models());
        assert_eq!(r1.final_cost.to_bits(), r2.final_cost.to_bits());
    }

    #[test]
    fn stagnation_rule() {
        assert!(!stagnated(&[1.0, 0.9, 0.8], 2, 0.01));
        assert!(!stagnated(&[1.0, 0.9, 0.8, 0.7], 2, 0.01));
        assert!(stagnated(&[1.0, 0.9, 0.9, 0.95], 2, 0.01));
        assert!(!stagnated(&[1.0, 0.9, 0.9, 0.95, 0.95], 2, 0.01));
    }

    #[test]
    fn portfolio_meets_the_same_contract() {
        let (inst, cost) = setup("0.2 :: a. 0.6 :: b. :- a, b.");
        let config = SamplerConfig {
            psi: 0.001,
            portfolio_width: 4,
            ..SamplerConfig::default()
        };
        let r = run_portfolio(&inst, cost.as_ref(), &config).unwrap();
        assert_eq!(r.reason, TerminationReason::Converged);
        assert!(r.final_cost <= 0.001);
        let (inst, cost) = setup("0.5 :: a. :- a. :- not a.");
        let r = run_portfolio(&inst, cost.as_ref(), &config).unwrap();
        assert_eq!(r.reason, TerminationReason::Unsat);
        let single = SamplerConfig {
            portfolio_width: 1,
            ..config
        };
        let (inst, cost) = setup("0.2 :: a. 0.6 :: b. :- a, b.");
        let a = run_portfolio(&inst, cost.as_ref(), &single).unwrap();
        let b = run_sampling(&inst, cost.as_ref(), &single).unwrap();
        assert_eq!(a.sample.models(), b.sample.models());
    }

    #[test]
    fn non_tight_sampling_yields_stable_models_only() {
        let (inst, _) = setup("p :- q. q :- p. p :- not r. r :- not p. {s}. q :- s.");
        let all = enumerate_all(&inst, &EngineConfig::default());
        let names: Vec<Vec<&str>> = all
            .iter()
            .map(|m| m.atoms().iter().map(|&a| inst.symbols.name(a)).collect())
            .collect();
        assert_eq!(names, vec![vec!["p", "q"], vec!["p", "q", "s"], vec!["r"]]);
    }

    #[test]
    fn bad_config_is_rejected() {
        let (inst, cost) = setup("0.5 :: a.");
        let config = SamplerConfig {
            noise: 1.0,
            ..SamplerConfig::default()
        };
        assert!(matches!(run_sampling(&inst, cost.as_ref(), &config), Err(SamplerError::Config(_))));
    }
}
