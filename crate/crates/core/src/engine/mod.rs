//! Conflict-driven nogood learning: propagation, branching through a
//! pluggable heuristic, first-UIP learning and backjumping.

mod activity;
mod assignment;
mod store;

pub use activity::ActivityHeuristic;
pub use assignment::{Assignment, Reason};
pub use store::NogoodStore;

use std::sync::atomic::{AtomicBool, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Lit, Nogood, NogoodOrigin};
use crate::transform::CompiledInstance;

pub type SolverRng = ChaCha8Rng;

/// A branching choice: the literal to make true, and the probability of
/// taking its complement instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub lit: Lit,
    pub flip_probability: f64,
}

/// Chooses decision literals. Implementations may defer to the engine's
/// activity heuristic.
pub trait BranchingHeuristic {
    /// Called only while at least one atom is unassigned; the returned
    /// literal's atom must be unassigned.
    fn choose_decision(&mut self, assignment: &Assignment, fallback: &mut ActivityHeuristic) -> Decision;
}

/// Plain CDNL branching: the activity heuristic alone.
#[derive(Debug, Default, Clone, Copy)]
pub struct ActivityBranching;

impl BranchingHeuristic for ActivityBranching {
    fn choose_decision(&mut self, assignment: &Assignment, fallback: &mut ActivityHeuristic) -> Decision {
        let lit = fallback.pick(assignment).expect("no unassigned atom left");
        Decision {
            lit,
            flip_probability: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub seed: u64,
    pub activity_decay: f64,
    pub phase_saving: bool,
    pub initial_phase: bool,
    /// Luby restarts within a model search.
    pub restarts: bool,
    pub restart_unit: u64,
    /// Reset activities and phases before each model search.
    pub reset_heuristic_between_models: bool,
    pub delete_learned: bool,
    /// Conflicts allowed per `solve_one` call.
    pub conflict_budget: Option<u64>,
    /// Diversify initial activities with seeded noise (portfolio members).
    pub randomize_activities: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            seed: 0,
            activity_decay: 0.95,
            phase_saving: true,
            initial_phase: false,
            restarts: true,
            restart_unit: 64,
            reset_heuristic_between_models: false,
            delete_learned: true,
            conflict_budget: None,
            randomize_activities: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// Truth value of every atom, indexed by slot.
    Model(Vec<bool>),
    Unsat,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("conflict budget of {0} exhausted")]
    ResourceLimit(u64),
    #[error("search cancelled")]
    Cancelled,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineStats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub models: u64,
}

/// One CDNL solver instance. Learned and loop nogoods persist across
/// `solve_one` calls.
#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    store: NogoodStore,
    assignment: Assignment,
    heuristic: ActivityHeuristic,
    rng: SolverRng,
    queue_head: usize,
    unsat: bool,
    learned_limit: usize,
    stats: EngineStats,
    seen: Vec<bool>,
}

impl Engine {
    pub fn new(instance: &CompiledInstance, config: EngineConfig) -> Engine {
        let n = instance.num_atoms();
        let mut store = NogoodStore::new(n);
        for ng in &instance.nogoods {
            store.add(ng);
        }
        let mut rng = SolverRng::seed_from_u64(config.seed);
        let mut heuristic = ActivityHeuristic::new(n, config.activity_decay, config.phase_saving, config.initial_phase);
        if config.randomize_activities {
            let noise: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            heuristic.perturb(noise.into_iter());
        }
        let learned_limit = (instance.nogoods.len() / 3).max(2000);
        Engine {
            config,
            store,
            assignment: Assignment::new(n),
            heuristic,
            rng,
            queue_head: 0,
            unsat: false,
            learned_limit,
            stats: EngineStats::default(),
            seen: vec![false; n],
        }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    pub fn store(&self) -> &NogoodStore {
        &self.store
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn rng(&mut self) -> &mut SolverRng {
        &mut self.rng
    }

    /// Adds a nogood between searches (loop or blocking nogoods).
    pub fn add_nogood(&mut self, nogood: &Nogood) {
        self.store.add(nogood);
    }

    /// Searches for one complete, conflict-free assignment starting from an
    /// empty trail.
    pub fn solve_one(&mut self, heuristic: &mut dyn BranchingHeuristic) -> Result<Outcome, EngineError> {
        self.solve_one_cancellable(heuristic, None)
    }

    pub fn solve_one_cancellable(
        &mut self,
        heuristic: &mut dyn BranchingHeuristic,
        cancel: Option<&AtomicBool>,
    ) -> Result<Outcome, EngineError> {
        self.reset_trail();
        if self.config.reset_heuristic_between_models {
            let n = self.assignment.num_atoms();
            self.heuristic = ActivityHeuristic::new(n, self.config.activity_decay, self.config.phase_saving, self.config.initial_phase);
        }
        if self.unsat || self.store.contains_empty {
            self.unsat = true;
            return Ok(Outcome::Unsat);
        }
        if self.config.delete_learned && self.store.count(NogoodOrigin::Learned) > self.learned_limit {
            self.store.reduce_learned();
            self.learned_limit = self.learned_limit + self.learned_limit / 10;
        }
        self.store.compact();
        if !self.assert_units() {
            self.unsat = true;
            return Ok(Outcome::Unsat);
        }

        let mut conflicts_here: u64 = 0;
        let mut luby_index: u32 = 0;
        let mut restart_at = self.config.restart_unit * luby(luby_index);
        let mut since_restart: u64 = 0;

        loop {
            if let Some(flag) = cancel {
                if flag.load(Ordering::Relaxed) {
                    return Err(EngineError::Cancelled);
                }
            }
            match self.propagate() {
                Some(conflict) => {
                    self.stats.conflicts += 1;
                    conflicts_here += 1;
                    since_restart += 1;
                    if self.assignment.current_level() == 0 {
                        self.unsat = true;
                        return Ok(Outcome::Unsat);
                    }
                    if let Some(budget) = self.config.conflict_budget {
                        if conflicts_here > budget {
                            return Err(EngineError::ResourceLimit(budget));
                        }
                    }
                    let (learned, level) = self.analyze_conflict(conflict);
                    self.backjump(level);
                    self.learn(learned);
                    self.heuristic.decay();
                    self.store.decay();
                    if self.config.restarts && since_restart >= restart_at {
                        self.stats.restarts += 1;
                        self.backjump(0);
                        since_restart = 0;
                        luby_index += 1;
                        restart_at = self.config.restart_unit * luby(luby_index);
                    }
                }
                None => {
                    if self.assignment.is_complete() {
                        self.stats.models += 1;
                        return Ok(Outcome::Model(self.assignment.values()));
                    }
                    let decision = heuristic.choose_decision(&self.assignment, &mut self.heuristic);
                    debug_assert!(!self.assignment.is_assigned(decision.lit.atom()));
                    let mut lit = decision.lit;
                    if decision.flip_probability > 0.0 && self.rng.gen::<f64>() < decision.flip_probability {
                        lit = !lit;
                    }
                    self.stats.decisions += 1;
                    self.assignment.new_level();
                    self.assignment.assign(lit, Reason::Decision);
                }
            }
        }
    }

    fn reset_trail(&mut self) {
        let heuristic = &mut self.heuristic;
        self.assignment.clear(|lit| heuristic.on_unassign(lit));
        self.queue_head = 0;
    }

    fn backjump(&mut self, level: u32) {
        let heuristic = &mut self.heuristic;
        self.assignment.backtrack(level, |lit| heuristic.on_unassign(lit));
        self.queue_head = self.queue_head.min(self.assignment.trail().len());
    }

    /// Asserts the complements of unit nogoods at level 0.
    fn assert_units(&mut self) -> bool {
        for i in 0..self.store.units.len() {
            let forced = !self.store.units[i];
            match self.assignment.lit_value(forced) {
                Some(true) => {}
                Some(false) => return false,
                None => self.assignment.assign(forced, Reason::Unit),
            }
        }
        true
    }

    /// Unit propagation to fixpoint; returns the id of a violated nogood.
    fn propagate(&mut self) -> Option<usize> {
        while self.queue_head < self.assignment.trail().len() {
            let lit = self.assignment.trail()[self.queue_head];
            self.queue_head += 1;
            self.stats.propagations += 1;
            let mut watchers = std::mem::take(&mut self.store.watches[lit.code()]);
            let mut i = 0;
            let mut conflict = None;
            while i < watchers.len() {
                let id = watchers[i];
                let ng = &mut self.store.nogoods[id];
                if ng.deleted {
                    watchers.swap_remove(i);
                    continue;
                }
                if ng.lits[0] == lit {
                    ng.lits.swap(0, 1);
                }
                debug_assert_eq!(ng.lits[1], lit);
                let other = ng.lits[0];
                if self.assignment.lit_value(other) == Some(false) {
                    i += 1;
                    continue;
                }
                let replacement = (2..ng.lits.len()).find(|&k| self.assignment.lit_value(ng.lits[k]) != Some(true));
                if let Some(k) = replacement {
                    ng.lits.swap(1, k);
                    let new_watch = ng.lits[1];
                    self.store.watches[new_watch.code()].push(id);
                    watchers.swap_remove(i);
                    continue;
                }
                match self.assignment.lit_value(other) {
                    None => {
                        self.assignment.assign(!other, Reason::Nogood(id));
                        i += 1;
                    }
                    Some(true) => {
                        conflict = Some(id);
                        break;
                    }
                    Some(false) => unreachable!(),
                }
            }
            let slot = &mut self.store.watches[lit.code()];
            watchers.append(slot);
            *slot = watchers;
            if conflict.is_some() {
                self.queue_head = self.assignment.trail().len();
                return conflict;
            }
        }
        None
    }

    /// First-UIP analysis. Returns the learned nogood (asserting literal
    /// first) and the level to backjump to.
    fn analyze_conflict(&mut self, conflict: usize) -> (Vec<Lit>, u32) {
        let current = self.assignment.current_level();
        let mut learned: Vec<Lit> = vec![Lit::from_dimacs(1)];
        let mut pending = 0usize;
        let mut reason_id = conflict;
        let mut resolved: Option<Lit> = None;
        let mut index = self.assignment.trail().len();

        loop {
            self.store.bump(reason_id);
            let lits = self.store.nogoods[reason_id].lits.clone();
            for q in lits {
                if Some(!q) == resolved {
                    continue;
                }
                let atom = q.atom();
                let slot = atom.slot();
                if self.seen[slot] || self.assignment.level(atom) == 0 {
                    continue;
                }
                self.seen[slot] = true;
                self.heuristic.bump(atom);
                if self.assignment.level(atom) == current {
                    pending += 1;
                } else {
                    learned.push(q);
                }
            }
            // Next seen literal on the trail.
            let lit = loop {
                index -= 1;
                let l = self.assignment.trail()[index];
                if self.seen[l.atom().slot()] {
                    break l;
                }
            };
            self.seen[lit.atom().slot()] = false;
            pending -= 1;
            if pending == 0 {
                learned[0] = lit;
                break;
            }
            resolved = Some(lit);
            reason_id = match self.assignment.reason(lit.atom()) {
                Reason::Nogood(id) => id,
                Reason::Decision | Reason::Unit => unreachable!("no implying nogood above level 0"),
            };
        }
        for l in &learned[1..] {
            self.seen[l.atom().slot()] = false;
        }

        // Highest remaining level goes to position 1 so it gets watched.
        let mut level = 0;
        if learned.len() > 1 {
            let mut best = 1;
            for k in 2..learned.len() {
                if self.assignment.level(learned[k].atom()) > self.assignment.level(learned[best].atom()) {
                    best = k;
                }
            }
            learned.swap(1, best);
            level = self.assignment.level(learned[1].atom());
        }
        (learned, level)
    }

    /// Stores a learned nogood and asserts the complement of its first
    /// literal.
    fn learn(&mut self, learned: Vec<Lit>) {
        let uip = learned[0];
        match self.store.insert(learned, NogoodOrigin::Learned) {
            Some(id) => self.assignment.assign(!uip, Reason::Nogood(id)),
            None => self.assignment.assign(!uip, Reason::Unit),
        }
    }
}

/// The Luby sequence 1, 1, 2, 1, 1, 2, 4, ...
pub fn luby(i: u32) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    let x = i as u64;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    let mut x = x;
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    1u64 << seq
}
