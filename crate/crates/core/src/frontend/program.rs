use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::model::{Atom, AtomKind, Lit};

/// Whether the input is a clause set or a ground normal logic program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sat,
    Asp,
}

/// A ground normal rule `head :- pos, not neg.`; no head means an integrity
/// constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub head: Option<Atom>,
    pub pos: Vec<Atom>,
    pub neg: Vec<Atom>,
}

impl Rule {
    pub fn new(head: Option<Atom>, pos: Vec<Atom>, neg: Vec<Atom>) -> Rule {
        Rule { head, pos, neg }
    }

    pub fn fact(head: Atom) -> Rule {
        Rule::new(Some(head), vec![], vec![])
    }

    pub fn constraint(pos: Vec<Atom>, neg: Vec<Atom>) -> Rule {
        Rule::new(None, pos, neg)
    }
}

/// A rule carrying a probability through its auxiliary parameter atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedRule {
    pub head: Atom,
    pub pos: Vec<Atom>,
    pub neg: Vec<Atom>,
    pub aux: Atom,
}

/// Names and kinds of all atoms, indexed densely from 1.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    names: Vec<String>,
    kinds: Vec<AtomKind>,
    index: HashMap<String, Atom>,
}

impl SymbolTable {
    pub fn new() -> SymbolTable {
        SymbolTable::default()
    }

    /// Returns the atom named `name`, creating an original atom if needed.
    pub fn intern(&mut self, name: &str) -> Atom {
        if let Some(&a) = self.index.get(name) {
            return a;
        }
        self.push(name.to_string(), AtomKind::Original)
    }

    /// Creates an auxiliary atom. Auxiliary names start with `_`, which no
    /// input identifier can.
    pub fn fresh(&mut self, stem: &str, kind: AtomKind) -> Atom {
        debug_assert!(kind != AtomKind::Original);
        let mut name = format!("_{stem}");
        let mut k = 1;
        while self.index.contains_key(&name) {
            k += 1;
            name = format!("_{stem}#{k}");
        }
        self.push(name, kind)
    }

    fn push(&mut self, name: String, kind: AtomKind) -> Atom {
        let atom = Atom::new(self.names.len() as u32 + 1);
        self.index.insert(name.clone(), atom);
        self.names.push(name);
        self.kinds.push(kind);
        atom
    }

    pub fn lookup(&self, name: &str) -> Option<Atom> {
        self.index.get(name).copied()
    }

    pub fn name(&self, atom: Atom) -> &str {
        &self.names[atom.slot()]
    }

    pub fn kind(&self, atom: Atom) -> AtomKind {
        self.kinds[atom.slot()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = Atom> {
        (1..=self.names.len() as u32).map(Atom::new)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProgramError {
    #[error("weight {weight} of `{atom}` is outside [0,1]")]
    WeightOutOfRange { atom: String, weight: f64 },
    #[error("duplicate weight declaration for `{0}`")]
    DuplicateWeight(String),
    #[error("parameter atom `{0}` occurs in no clause, rule or choice declaration")]
    UnusedParameter(String),
    #[error("atom `{0}` must be declared uncertain (choice or weight) to be conditioned on")]
    NotUncertain(String),
}

/// The logical input: a clause set (SAT mode) or a ground normal program with
/// choice and weight declarations (ASP mode).
#[derive(Debug, Clone)]
pub struct Program {
    pub mode: Mode,
    pub symbols: SymbolTable,
    pub clauses: Vec<Vec<Lit>>,
    pub rules: Vec<Rule>,
    pub weighted_rules: Vec<WeightedRule>,
    pub choices: Vec<Atom>,
    /// Parameter atoms θ, in declaration order.
    pub params: Vec<Atom>,
    pub weights: BTreeMap<Atom, f64>,
    pub queries: Vec<Atom>,
}

impl Program {
    pub fn new(mode: Mode) -> Program {
        Program {
            mode,
            symbols: SymbolTable::new(),
            clauses: Vec::new(),
            rules: Vec::new(),
            weighted_rules: Vec::new(),
            choices: Vec::new(),
            params: Vec::new(),
            weights: BTreeMap::new(),
            queries: Vec::new(),
        }
    }

    /// A SAT-mode program over variables `1..=num_vars`, named by their
    /// numbers.
    pub fn with_variables(num_vars: u32) -> Program {
        let mut p = Program::new(Mode::Sat);
        for v in 1..=num_vars {
            p.symbols.intern(&v.to_string());
        }
        p
    }

    pub fn num_atoms(&self) -> usize {
        self.symbols.len()
    }

    pub fn atom(&mut self, name: &str) -> Atom {
        self.symbols.intern(name)
    }

    pub fn name(&self, atom: Atom) -> &str {
        self.symbols.name(atom)
    }

    pub fn add_param(&mut self, atom: Atom) {
        if !self.params.contains(&atom) {
            self.params.push(atom);
        }
    }

    pub fn add_choice(&mut self, atom: Atom) {
        if !self.choices.contains(&atom) {
            self.choices.push(atom);
        }
    }

    /// Declares `atom` as an uncertain parameter atom with probability
    /// `weight`; this implies a choice declaration.
    pub fn set_weight(&mut self, atom: Atom, weight: f64) -> Result<(), ProgramError> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(ProgramError::WeightOutOfRange {
                atom: self.name(atom).to_string(),
                weight,
            });
        }
        if self.weights.contains_key(&atom) {
            return Err(ProgramError::DuplicateWeight(self.name(atom).to_string()));
        }
        self.weights.insert(atom, weight);
        self.add_choice(atom);
        self.add_param(atom);
        Ok(())
    }

    /// Adds a weighted rule; a fresh auxiliary atom becomes the parameter
    /// carrying `weight`.
    pub fn add_weighted_rule(&mut self, head: Atom, pos: Vec<Atom>, neg: Vec<Atom>, weight: f64) -> Result<Atom, ProgramError> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(ProgramError::WeightOutOfRange {
                atom: self.name(head).to_string(),
                weight,
            });
        }
        let aux = self.symbols.fresh(&format!("w{}", self.weighted_rules.len() + 1), AtomKind::WeightAux);
        self.weighted_rules.push(WeightedRule { head, pos, neg, aux });
        self.weights.insert(aux, weight);
        self.add_param(aux);
        Ok(aux)
    }

    /// Target weights of the parameters that have one, in parameter order.
    pub fn weighted_params(&self) -> Vec<(Atom, f64)> {
        self.params
            .iter()
            .filter_map(|p| self.weights.get(p).map(|&w| (*p, w)))
            .collect()
    }

    fn occurs(&self, atom: Atom) -> bool {
        match self.mode {
            Mode::Sat => self.clauses.iter().flatten().any(|l| l.atom() == atom),
            Mode::Asp => {
                self.choices.contains(&atom)
                    || self
                        .rules
                        .iter()
                        .any(|r| r.head == Some(atom) || r.pos.contains(&atom) || r.neg.contains(&atom))
                    || self.weighted_rules.iter().any(|r| {
                        r.aux == atom || r.head == atom || r.pos.contains(&atom) || r.neg.contains(&atom)
                    })
            }
        }
    }

    /// Checks the type invariants: weights in range and every parameter
    /// atom used somewhere.
    pub fn validate(&self) -> Result<(), ProgramError> {
        for (&atom, &weight) in &self.weights {
            if !(0.0..=1.0).contains(&weight) {
                return Err(ProgramError::WeightOutOfRange {
                    atom: self.name(atom).to_string(),
                    weight,
                });
            }
        }
        for &p in &self.params {
            if !self.occurs(p) {
                return Err(ProgramError::UnusedParameter(self.name(p).to_string()));
            }
        }
        Ok(())
    }
}
