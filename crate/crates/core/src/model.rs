//! Shared domain types: atoms, literals, nogoods, models and the sample
//! accumulator.

use std::fmt;
use std::ops::Not;

use thiserror::Error;

/// A propositional atom. Indices are dense and 1-based, so DIMACS variable
/// `k` is `Atom(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom(u32);

impl Atom {
    pub fn new(index: u32) -> Atom {
        assert!(index > 0, "atom indices are 1-based");
        Atom(index)
    }

    #[inline]
    pub fn index(self) -> u32 {
        self.0
    }

    /// Zero-based slot for per-atom tables.
    #[inline]
    pub fn slot(self) -> usize {
        (self.0 - 1) as usize
    }

    #[inline]
    pub fn from_slot(slot: usize) -> Atom {
        Atom(slot as u32 + 1)
    }

    #[inline]
    pub fn pos(self) -> Lit {
        Lit::new(self, true)
    }

    #[inline]
    pub fn neg(self) -> Lit {
        Lit::new(self, false)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Where an atom came from. Everything except `Original` is introduced by the
/// translation and carries a reserved `_` name prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AtomKind {
    Original,
    BodyAux,
    ChoiceAux,
    WeightAux,
}

/// A signed atom. `T a` (positive) holds when `a` is true, `F a` (negative)
/// when `a` is false.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    #[inline]
    pub fn new(atom: Atom, positive: bool) -> Lit {
        Lit((atom.slot() as u32) << 1 | (!positive) as u32)
    }

    #[inline]
    pub fn atom(self) -> Atom {
        Atom((self.0 >> 1) + 1)
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    /// Dense code for literal-indexed tables (watch lists).
    #[inline]
    pub fn code(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn complement(self) -> Lit {
        Lit(self.0 ^ 1)
    }

    /// DIMACS-style signed integer.
    pub fn to_dimacs(self) -> i64 {
        let v = self.atom().index() as i64;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }

    pub fn from_dimacs(value: i64) -> Lit {
        assert!(value != 0);
        Lit::new(Atom::new(value.unsigned_abs() as u32), value > 0)
    }
}

impl Not for Lit {
    type Output = Lit;
    #[inline]
    fn not(self) -> Lit {
        self.complement()
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.is_positive() { 'T' } else { 'F' };
        write!(f, "{}{}", sign, self.atom().index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NogoodOrigin {
    Completion,
    Learned,
    Loop,
    /// Excludes an already enumerated model in enumeration mode.
    Blocking,
}

/// A set of literals that must not all hold at once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nogood {
    lits: Vec<Lit>,
    origin: NogoodOrigin,
}

impl Nogood {
    /// Builds a nogood, removing duplicate literals. Returns `None` when the
    /// set contains complementary literals: such a nogood can never be
    /// violated and carries no information.
    pub fn new(mut lits: Vec<Lit>, origin: NogoodOrigin) -> Option<Nogood> {
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0].atom() == w[1].atom()) {
            return None;
        }
        Some(Nogood { lits, origin })
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn origin(&self) -> NogoodOrigin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    /// True when every literal holds under the total valuation `value`.
    pub fn violated_by(&self, value: impl Fn(Atom) -> bool) -> bool {
        self.lits.iter().all(|l| value(l.atom()) == l.is_positive())
    }
}

/// A sampled model: the true atoms of a complete assignment with body and
/// choice auxiliaries removed, sorted by index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Model {
    atoms: Vec<Atom>,
}

impl Model {
    pub fn new(mut atoms: Vec<Atom>) -> Model {
        atoms.sort_unstable();
        atoms.dedup();
        Model { atoms }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn contains(&self, atom: Atom) -> bool {
        self.atoms.binary_search(&atom).is_ok()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Restriction of the model to `atoms` (kept in index order).
    pub fn project(&self, atoms: &[Atom]) -> Model {
        Model::new(atoms.iter().copied().filter(|&a| self.contains(a)).collect())
    }
}

impl FromIterator<Atom> for Model {
    fn from_iter<T: IntoIterator<Item = Atom>>(iter: T) -> Self {
        Model::new(iter.into_iter().collect())
    }
}

/// An exact frequency `count / size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frequency {
    pub count: u64,
    pub size: u64,
}

impl Frequency {
    pub fn as_f64(self) -> f64 {
        self.count as f64 / self.size as f64
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("frequency is undefined for an empty sample")]
    EmptySample,
    #[error("atom {0} is not a parameter atom of this sample")]
    NotAParameter(Atom),
}

/// The multiset of sampled models together with exact occurrence counts of
/// the parameter atoms.
#[derive(Debug, Clone, Default)]
pub struct SampleAccumulator {
    params: Vec<Atom>,
    models: Vec<Model>,
    counts: Vec<u64>,
}

impl SampleAccumulator {
    pub fn new(params: Vec<Atom>) -> SampleAccumulator {
        let counts = vec![0; params.len()];
        SampleAccumulator {
            params,
            models: Vec::new(),
            counts,
        }
    }

    pub fn params(&self) -> &[Atom] {
        &self.params
    }

    pub fn models(&self) -> &[Model] {
        &self.models
    }

    pub fn size(&self) -> u64 {
        self.models.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Occurrence count per parameter atom, in parameter order.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn add_model(&mut self, model: Model) {
        for (param, count) in self.params.iter().zip(self.counts.iter_mut()) {
            if model.contains(*param) {
                *count += 1;
            }
        }
        self.models.push(model);
    }

    pub fn frequency(&self, param: Atom) -> Result<Frequency, SampleError> {
        let i = self
            .params
            .iter()
            .position(|&p| p == param)
            .ok_or(SampleError::NotAParameter(param))?;
        self.frequency_at(i)
    }

    /// Frequency of the `i`-th parameter atom.
    pub fn frequency_at(&self, i: usize) -> Result<Frequency, SampleError> {
        if self.models.is_empty() {
            return Err(SampleError::EmptySample);
        }
        Ok(Frequency {
            count: self.counts[i],
            size: self.size(),
        })
    }

    /// The frequency vector, with every entry 0 for an empty sample.
    pub fn beta(&self) -> Vec<f64> {
        if self.models.is_empty() {
            return vec![0.0; self.params.len()];
        }
        let size = self.size() as f64;
        self.counts.iter().map(|&c| c as f64 / size).collect()
    }

    /// Counts recomputed from the model list.
    pub fn recount(&self) -> Vec<u64> {
        self.params
            .iter()
            .map(|&p| self.models.iter().filter(|m| m.contains(p)).count() as u64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(i: u32) -> Atom {
        Atom::new(i)
    }

    fn model(atoms: &[u32]) -> Model {
        atoms.iter().map(|&i| a(i)).collect()
    }

    #[test]
    fn frequency_counts() {
        let mut acc = SampleAccumulator::new(vec![a(1), a(2)]);
        for m in [model(&[1]), model(&[1]), model(&[2]), model(&[])] {
            acc.add_model(m);
        }
        assert_eq!(acc.frequency(a(1)).unwrap().as_f64(), 0.5);

        let mut acc = SampleAccumulator::new(vec![a(1), a(2)]);
        acc.add_model(model(&[1]));
        assert_eq!(acc.frequency(a(2)).unwrap().as_f64(), 0.0);

        let mut acc = SampleAccumulator::new(vec![a(1), a(2)]);
        acc.add_model(model(&[1, 2]));
        acc.add_model(model(&[2]));
        assert_eq!(acc.frequency(a(2)).unwrap().as_f64(), 1.0);
    }

    #[test]
    fn add_model_updates_size_and_counts() {
        let mut acc = SampleAccumulator::new(vec![a(1)]);
        acc.add_model(model(&[1]));
        assert_eq!(acc.size(), 1);
        assert_eq!(acc.frequency(a(1)).unwrap().as_f64(), 1.0);
        acc.add_model(model(&[]));
        assert_eq!(acc.size(), 2);
        assert_eq!(acc.frequency(a(1)).unwrap(), Frequency { count: 1, size: 2 });

        let mut acc = SampleAccumulator::new(vec![a(1)]);
        for _ in 0..3 {
            acc.add_model(model(&[1]));
        }
        assert_eq!(acc.frequency(a(1)).unwrap().as_f64(), 1.0);
    }

    #[test]
    fn empty_sample_has_no_frequency() {
        let acc = SampleAccumulator::new(vec![a(1)]);
        assert_eq!(acc.frequency(a(1)), Err(SampleError::EmptySample));
        assert_eq!(acc.beta(), vec![0.0]);
    }

    #[test]
    fn tautological_nogood_is_dropped() {
        assert!(Nogood::new(vec![a(1).pos(), a(1).neg()], NogoodOrigin::Completion).is_none());
        let ng = Nogood::new(vec![a(2).pos(), a(1).neg(), a(2).pos()], NogoodOrigin::Learned).unwrap();
        assert_eq!(ng.lits(), &[a(1).neg(), a(2).pos()]);
    }

    #[test]
    fn dimacs_literals() {
        assert_eq!(Lit::from_dimacs(-3), a(3).neg());
        assert_eq!(a(7).pos().to_dimacs(), 7);
    }

    proptest! {
        #[test]
        fn complement_is_involution(index in 1u32..100_000, positive: bool) {
            let l = Lit::new(Atom::new(index), positive);
            prop_assert_eq!(!!l, l);
            prop_assert_ne!(!l, l);
            prop_assert_eq!((!l).atom(), l.atom());
        }

        #[test]
        fn incremental_counts_match_recount(
            stream in proptest::collection::vec(proptest::collection::vec(1u32..8, 0..6), 0..60)
        ) {
            let params: Vec<Atom> = (1..=5).map(Atom::new).collect();
            let mut acc = SampleAccumulator::new(params);
            for atoms in stream {
                acc.add_model(model(&atoms));
                prop_assert_eq!(acc.recount(), acc.counts().to_vec());
                for &c in acc.counts() {
                    prop_assert!(c <= acc.size());
                }
            }
        }
    }
}
