use crate::model::{Lit, Nogood, NogoodOrigin};

#[derive(Debug, Clone)]
pub(crate) struct StoredNogood {
    /// Positions 0 and 1 are the watched literals.
    pub lits: Vec<Lit>,
    pub origin: NogoodOrigin,
    pub activity: f64,
    pub deleted: bool,
}

/// The constraint database: initial, learned and loop nogoods with
/// two-watched-literal indexing. Unit nogoods are kept apart and asserted at
/// level 0.
#[derive(Debug, Clone)]
pub struct NogoodStore {
    pub(crate) nogoods: Vec<StoredNogood>,
    /// Ids of nogoods watching each literal, indexed by literal code. A
    /// nogood is visited when one of its watched literals becomes true.
    pub(crate) watches: Vec<Vec<usize>>,
    pub(crate) units: Vec<Lit>,
    pub(crate) contains_empty: bool,
    pub(crate) deleted: usize,
    pub(crate) activity_increment: f64,
}

impl NogoodStore {
    pub fn new(num_atoms: usize) -> NogoodStore {
        NogoodStore {
            nogoods: Vec::new(),
            watches: vec![Vec::new(); 2 * num_atoms],
            units: Vec::new(),
            contains_empty: false,
            deleted: 0,
            activity_increment: 1.0,
        }
    }

    /// Adds a nogood; returns its id when it has two or more literals.
    /// `watch` orders the literals so that the first two are watched.
    pub(crate) fn insert(&mut self, mut lits: Vec<Lit>, origin: NogoodOrigin) -> Option<usize> {
        match lits.len() {
            0 => {
                self.contains_empty = true;
                None
            }
            1 => {
                if !self.units.contains(&lits[0]) {
                    self.units.push(lits[0]);
                }
                None
            }
            _ => {
                lits.shrink_to_fit();
                let id = self.nogoods.len();
                self.watches[lits[0].code()].push(id);
                self.watches[lits[1].code()].push(id);
                self.nogoods.push(StoredNogood {
                    lits,
                    origin,
                    activity: 0.0,
                    deleted: false,
                });
                Some(id)
            }
        }
    }

    pub fn add(&mut self, nogood: &Nogood) {
        self.insert(nogood.lits().to_vec(), nogood.origin());
    }

    pub fn len(&self) -> usize {
        self.nogoods.len() - self.deleted + self.units.len() + self.contains_empty as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, origin: NogoodOrigin) -> usize {
        self.nogoods.iter().filter(|n| !n.deleted && n.origin == origin).count()
    }

    /// All live nogoods, units included.
    pub fn iter(&self) -> impl Iterator<Item = Nogood> + '_ {
        self.units
            .iter()
            .map(|&u| Nogood::new(vec![u], NogoodOrigin::Completion).unwrap())
            .chain(
                self.nogoods
                    .iter()
                    .filter(|n| !n.deleted)
                    .filter_map(|n| Nogood::new(n.lits.clone(), n.origin)),
            )
    }

    pub(crate) fn bump(&mut self, id: usize) {
        let ng = &mut self.nogoods[id];
        ng.activity += self.activity_increment;
        if ng.activity > 1e100 {
            for n in &mut self.nogoods {
                n.activity *= 1e-100;
            }
            self.activity_increment *= 1e-100;
        }
    }

    pub(crate) fn decay(&mut self) {
        self.activity_increment /= 0.999;
    }

    /// Deletes the less active half of the learned nogoods longer than two
    /// literals. Only valid while no literal's reason refers to a learned
    /// nogood above level 0.
    pub(crate) fn reduce_learned(&mut self) {
        let mut candidates: Vec<usize> = (0..self.nogoods.len())
            .filter(|&i| {
                let n = &self.nogoods[i];
                !n.deleted && n.origin == NogoodOrigin::Learned && n.lits.len() > 2
            })
            .collect();
        candidates.sort_by(|&a, &b| {
            self.nogoods[a]
                .activity
                .partial_cmp(&self.nogoods[b].activity)
                .unwrap()
                .then(a.cmp(&b))
        });
        for &id in &candidates[..candidates.len() / 2] {
            self.nogoods[id].deleted = true;
            self.deleted += 1;
        }
    }

    /// Drops deleted nogoods and rebuilds the watch lists. Ids change, so
    /// this must only run with an empty trail.
    pub(crate) fn compact(&mut self) {
        if self.deleted == 0 {
            return;
        }
        self.nogoods.retain(|n| !n.deleted);
        self.deleted = 0;
        for w in &mut self.watches {
            w.clear();
        }
        for (id, n) in self.nogoods.iter().enumerate() {
            self.watches[n.lits[0].code()].push(id);
            self.watches[n.lits[1].code()].push(id);
        }
    }
}
