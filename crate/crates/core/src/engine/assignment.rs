use crate::model::{Atom, Lit};

/// Why an atom holds its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    Decision,
    /// Implied by the stored nogood with this id.
    Nogood(usize),
    /// Forced at level 0 by a single-literal nogood.
    Unit,
}

/// The partial assignment: trail order, decision levels and reasons.
#[derive(Debug, Clone)]
pub struct Assignment {
    values: Vec<i8>,
    levels: Vec<u32>,
    reasons: Vec<Reason>,
    trail: Vec<Lit>,
    /// Trail length at the start of each decision level above 0.
    level_starts: Vec<usize>,
}

impl Assignment {
    pub fn new(num_atoms: usize) -> Assignment {
        Assignment {
            values: vec![0; num_atoms],
            levels: vec![0; num_atoms],
            reasons: vec![Reason::Decision; num_atoms],
            trail: Vec::with_capacity(num_atoms),
            level_starts: Vec::new(),
        }
    }

    pub fn num_atoms(&self) -> usize {
        self.values.len()
    }

    /// `Some(true)` if the atom is true, `Some(false)` if false.
    #[inline]
    pub fn value(&self, atom: Atom) -> Option<bool> {
        match self.values[atom.slot()] {
            0 => None,
            v => Some(v > 0),
        }
    }

    #[inline]
    pub fn is_assigned(&self, atom: Atom) -> bool {
        self.values[atom.slot()] != 0
    }

    /// `Some(true)` if the literal holds, `Some(false)` if its complement does.
    #[inline]
    pub fn lit_value(&self, lit: Lit) -> Option<bool> {
        self.value(lit.atom()).map(|v| v == lit.is_positive())
    }

    #[inline]
    pub fn is_true(&self, lit: Lit) -> bool {
        self.lit_value(lit) == Some(true)
    }

    #[inline]
    pub fn level(&self, atom: Atom) -> u32 {
        self.levels[atom.slot()]
    }

    #[inline]
    pub fn reason(&self, atom: Atom) -> Reason {
        self.reasons[atom.slot()]
    }

    pub fn trail(&self) -> &[Lit] {
        &self.trail
    }

    pub fn current_level(&self) -> u32 {
        self.level_starts.len() as u32
    }

    pub fn is_complete(&self) -> bool {
        self.trail.len() == self.values.len()
    }

    /// Truth value of every atom; only meaningful when complete.
    pub fn values(&self) -> Vec<bool> {
        self.values.iter().map(|&v| v > 0).collect()
    }

    pub(crate) fn assign(&mut self, lit: Lit, reason: Reason) {
        let slot = lit.atom().slot();
        debug_assert_eq!(self.values[slot], 0, "atom assigned twice");
        self.values[slot] = if lit.is_positive() { 1 } else { -1 };
        self.levels[slot] = self.current_level();
        self.reasons[slot] = reason;
        self.trail.push(lit);
    }

    pub(crate) fn new_level(&mut self) {
        self.level_starts.push(self.trail.len());
    }

    /// Undoes every assignment above `level`, handing each removed literal to
    /// `on_unassign`.
    pub(crate) fn backtrack(&mut self, level: u32, mut on_unassign: impl FnMut(Lit)) {
        if level >= self.current_level() {
            return;
        }
        let keep = self.level_starts[level as usize];
        for &lit in &self.trail[keep..] {
            self.values[lit.atom().slot()] = 0;
            on_unassign(lit);
        }
        self.trail.truncate(keep);
        self.level_starts.truncate(level as usize);
    }

    /// Clears the whole trail, level 0 included.
    pub(crate) fn clear(&mut self, mut on_unassign: impl FnMut(Lit)) {
        for &lit in &self.trail {
            self.values[lit.atom().slot()] = 0;
            on_unassign(lit);
        }
        self.trail.clear();
        self.level_starts.clear();
    }
}
