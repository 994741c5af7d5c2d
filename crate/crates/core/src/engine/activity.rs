//! Activity-based fallback branching with phase saving.

use super::assignment::Assignment;
use crate::model::{Atom, Lit};

/// Max-heap of atoms keyed by activity.
#[derive(Debug, Clone)]
struct ActivityHeap {
    heap: Vec<u32>,
    /// Position of each atom slot in `heap`, or `usize::MAX`.
    position: Vec<usize>,
}

impl ActivityHeap {
    fn new(n: usize) -> ActivityHeap {
        ActivityHeap {
            heap: Vec::with_capacity(n),
            position: vec![usize::MAX; n],
        }
    }

    fn contains(&self, slot: usize) -> bool {
        self.position[slot] != usize::MAX
    }

    fn better(act: &[f64], a: u32, b: u32) -> bool {
        let (x, y) = (act[a as usize], act[b as usize]);
        x > y || (x == y && a < b)
    }

    fn up(&mut self, mut i: usize, act: &[f64]) {
        let item = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if !Self::better(act, item, self.heap[parent]) {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.position[self.heap[i] as usize] = i;
            i = parent;
        }
        self.heap[i] = item;
        self.position[item as usize] = i;
    }

    fn down(&mut self, mut i: usize, act: &[f64]) {
        let item = self.heap[i];
        loop {
            let left = 2 * i + 1;
            if left >= self.heap.len() {
                break;
            }
            let right = left + 1;
            let child = if right < self.heap.len() && Self::better(act, self.heap[right], self.heap[left]) {
                right
            } else {
                left
            };
            if !Self::better(act, self.heap[child], item) {
                break;
            }
            self.heap[i] = self.heap[child];
            self.position[self.heap[i] as usize] = i;
            i = child;
        }
        self.heap[i] = item;
        self.position[item as usize] = i;
    }

    fn insert(&mut self, slot: usize, act: &[f64]) {
        if self.contains(slot) {
            return;
        }
        self.heap.push(slot as u32);
        let i = self.heap.len() - 1;
        self.position[slot] = i;
        self.up(i, act);
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.position[top as usize] = usize::MAX;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.position[last as usize] = 0;
            self.down(0, act);
        }
        Some(top as usize)
    }

    fn increased(&mut self, slot: usize, act: &[f64]) {
        if self.contains(slot) {
            self.up(self.position[slot], act);
        }
    }
}

/// Exponentially decayed atom activity (bumped for atoms taking part in
/// conflict resolution) with saved phases.
#[derive(Debug, Clone)]
pub struct ActivityHeuristic {
    activity: Vec<f64>,
    increment: f64,
    decay: f64,
    phase: Vec<bool>,
    phase_saving: bool,
    heap: ActivityHeap,
}

impl ActivityHeuristic {
    pub fn new(num_atoms: usize, decay: f64, phase_saving: bool, initial_phase: bool) -> ActivityHeuristic {
        let activity = vec![0.0; num_atoms];
        let mut heap = ActivityHeap::new(num_atoms);
        for slot in 0..num_atoms {
            heap.insert(slot, &activity);
        }
        ActivityHeuristic {
            activity,
            increment: 1.0,
            decay,
            phase: vec![initial_phase; num_atoms],
            phase_saving,
            heap,
        }
    }

    /// Small initial activities; used to diversify portfolio members.
    pub fn perturb(&mut self, noise: impl Iterator<Item = f64>) {
        for (a, n) in self.activity.iter_mut().zip(noise) {
            *a += n * 1e-3;
        }
        let slots: Vec<usize> = (0..self.activity.len()).collect();
        self.heap = ActivityHeap::new(self.activity.len());
        for slot in slots {
            self.heap.insert(slot, &self.activity);
        }
    }

    pub fn bump(&mut self, atom: Atom) {
        let slot = atom.slot();
        self.activity[slot] += self.increment;
        if self.activity[slot] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.increment *= 1e-100;
        }
        self.heap.increased(slot, &self.activity);
    }

    pub fn decay(&mut self) {
        self.increment /= self.decay;
    }

    pub fn activity(&self, atom: Atom) -> f64 {
        self.activity[atom.slot()]
    }

    /// Called for every literal removed from the trail.
    pub fn on_unassign(&mut self, lit: Lit) {
        let slot = lit.atom().slot();
        if self.phase_saving {
            self.phase[slot] = lit.is_positive();
        }
        self.heap.insert(slot, &self.activity);
    }

    /// The most active unassigned atom in its saved phase.
    pub fn pick(&mut self, assignment: &Assignment) -> Option<Lit> {
        while let Some(slot) = self.heap.pop(&self.activity) {
            let atom = Atom::from_slot(slot);
            if !assignment.is_assigned(atom) {
                return Some(Lit::new(atom, self.phase[slot]));
            }
        }
        None
    }

    /// Re-inserts an atom popped by [`pick`](Self::pick) without being
    /// assigned.
    pub fn restore(&mut self, atom: Atom) {
        self.heap.insert(atom.slot(), &self.activity);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_most_active_then_lowest_index() {
        let mut h = ActivityHeuristic::new(4, 0.95, true, false);
        let assignment = Assignment::new(4);
        h.bump(Atom::new(3));
        assert_eq!(h.pick(&assignment), Some(Atom::new(3).neg()));
        assert_eq!(h.pick(&assignment), Some(Atom::new(1).neg()));
        assert_eq!(h.pick(&assignment), Some(Atom::new(2).neg()));
    }

    #[test]
    fn phase_is_saved_on_unassign() {
        let mut h = ActivityHeuristic::new(2, 0.95, true, false);
        let assignment = Assignment::new(2);
        let _ = h.pick(&assignment);
        h.on_unassign(Atom::new(1).pos());
        assert_eq!(h.pick(&assignment), Some(Atom::new(1).pos()));
    }
}
