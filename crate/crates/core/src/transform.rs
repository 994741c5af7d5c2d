//! Translation of a [`Program`] into its initial nogoods: choice and
//! weighted-rule expansion, Clark's completion, and tightness analysis.

use std::collections::HashMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::frontend::{Mode, Program, Rule, SymbolTable, WeightedRule};
use crate::model::{Atom, AtomKind, Lit, Nogood, NogoodOrigin};

/// Positive dependency graph over atoms: an edge `h -> b` for every rule with
/// head `h` and `b` in its positive body.
#[derive(Debug, Clone, Default)]
pub struct DependencyGraph {
    pub edges: Vec<Vec<Atom>>,
    /// Strongly connected components that contain a cycle.
    pub cyclic_sccs: Vec<Vec<Atom>>,
}

impl DependencyGraph {
    pub fn successors(&self, atom: Atom) -> &[Atom] {
        &self.edges[atom.slot()]
    }
}

/// Everything the engine and the stability check need about one program.
#[derive(Debug, Clone)]
pub struct CompiledInstance {
    pub mode: Mode,
    /// The program's symbols extended with body and choice auxiliaries.
    pub symbols: SymbolTable,
    pub nogoods: Vec<Nogood>,
    /// Normal rules after expansion, integrity constraints included.
    pub rules: Vec<Rule>,
    /// Body literal per rule (`None` for an empty body).
    pub rule_bodies: Vec<Option<Lit>>,
    pub graph: DependencyGraph,
    pub tight: bool,
    pub params: Vec<Atom>,
}

impl CompiledInstance {
    pub fn num_atoms(&self) -> usize {
        self.symbols.len()
    }

    pub fn kind(&self, atom: Atom) -> AtomKind {
        self.symbols.kind(atom)
    }

    /// Atoms that survive model extraction.
    pub fn is_visible(&self, atom: Atom) -> bool {
        matches!(self.kind(atom), AtomKind::Original | AtomKind::WeightAux)
    }
}

impl CompiledInstance {
    /// A SAT-mode instance over atoms `1..=num_atoms` given directly as
    /// nogoods.
    pub fn from_nogoods(num_atoms: usize, nogoods: Vec<Nogood>) -> CompiledInstance {
        let mut symbols = SymbolTable::new();
        for v in 1..=num_atoms {
            symbols.intern(&v.to_string());
        }
        CompiledInstance {
            mode: Mode::Sat,
            symbols,
            nogoods,
            rules: Vec::new(),
            rule_bodies: Vec::new(),
            graph: DependencyGraph {
                edges: vec![Vec::new(); num_atoms],
                cyclic_sccs: Vec::new(),
            },
            tight: true,
            params: Vec::new(),
        }
    }
}

/// `{a}.` becomes `a :- not a'.` and `a' :- not a.` over a fresh `a'`.
pub fn expand_choice(symbols: &mut SymbolTable, atom: Atom) -> [Rule; 2] {
    let stem = format!("not_{}", symbols.name(atom));
    let shadow = symbols.fresh(&stem, AtomKind::ChoiceAux);
    [
        Rule::new(Some(atom), vec![], vec![shadow]),
        Rule::new(Some(shadow), vec![], vec![atom]),
    ]
}

/// `h :- B` with auxiliary `aux` becomes `h :- B, not aux.` and
/// `aux :- B, not h.`
pub fn expand_weighted_rule(rule: &WeightedRule) -> [Rule; 2] {
    let mut neg_h = rule.neg.clone();
    neg_h.push(rule.aux);
    let mut neg_aux = rule.neg.clone();
    neg_aux.push(rule.head);
    [
        Rule::new(Some(rule.head), rule.pos.clone(), neg_h),
        Rule::new(Some(rule.aux), rule.pos.clone(), neg_aux),
    ]
}

/// Result of the completion: nogoods plus the body literal chosen for every
/// rule.
#[derive(Debug, Clone)]
pub struct Completion {
    pub nogoods: Vec<Nogood>,
    pub rule_bodies: Vec<Option<Lit>>,
}

/// Clark's completion as nogoods. Bodies with one literal reuse that literal;
/// longer bodies get a shared auxiliary atom; integrity constraints map
/// straight to nogoods; atoms without rules are forced false.
pub fn clark_completion(symbols: &mut SymbolTable, rules: &[Rule]) -> Completion {
    let mut nogoods = Vec::new();
    let mut push = |lits: Vec<Lit>| {
        if let Some(ng) = Nogood::new(lits, NogoodOrigin::Completion) {
            nogoods.push(ng);
        }
    };

    let mut body_atoms: HashMap<(Vec<Atom>, Vec<Atom>), Lit> = HashMap::new();
    let mut rule_bodies = Vec::with_capacity(rules.len());
    let mut bodies_of_head: Vec<Vec<Option<Lit>>> = vec![Vec::new(); symbols.len()];

    for rule in rules {
        let mut pos = rule.pos.clone();
        pos.sort_unstable();
        pos.dedup();
        let mut neg = rule.neg.clone();
        neg.sort_unstable();
        neg.dedup();

        let Some(head) = rule.head else {
            push(pos.iter().map(|a| a.pos()).chain(neg.iter().map(|a| a.neg())).collect());
            rule_bodies.push(None);
            continue;
        };

        let body = match (pos.len(), neg.len()) {
            (0, 0) => None,
            (1, 0) => Some(pos[0].pos()),
            (0, 1) => Some(neg[0].neg()),
            _ => {
                let key = (pos.clone(), neg.clone());
                let lit = match body_atoms.get(&key) {
                    Some(&lit) => lit,
                    None => {
                        let beta = symbols.fresh(&format!("body{}", body_atoms.len() + 1), AtomKind::BodyAux);
                        let lit = beta.pos();
                        body_atoms.insert(key, lit);
                        let mut all = vec![beta.neg()];
                        all.extend(pos.iter().map(|a| a.pos()));
                        all.extend(neg.iter().map(|a| a.neg()));
                        push(all);
                        for a in &pos {
                            push(vec![beta.pos(), a.neg()]);
                        }
                        for a in &neg {
                            push(vec![beta.pos(), a.pos()]);
                        }
                        lit
                    }
                };
                Some(lit)
            }
        };
        rule_bodies.push(body);
        bodies_of_head[head.slot()].push(body);
    }

    for (slot, bodies) in bodies_of_head.iter().enumerate() {
        let atom = Atom::from_slot(slot);
        if bodies.is_empty() {
            push(vec![atom.pos()]);
        } else if bodies.iter().any(Option::is_none) {
            push(vec![atom.neg()]);
        } else {
            let mut support = vec![atom.pos()];
            for body in bodies.iter().flatten() {
                support.push(body.complement());
                push(vec![atom.neg(), *body]);
            }
            push(support);
        }
    }

    Completion { nogoods, rule_bodies }
}

/// Builds the positive dependency graph; the program is tight when it has no
/// cycle.
pub fn analyze_tightness(num_atoms: usize, rules: &[Rule]) -> (DependencyGraph, bool) {
    let mut edges = vec![Vec::new(); num_atoms];
    let mut graph = DiGraph::<(), ()>::with_capacity(num_atoms, 0);
    for _ in 0..num_atoms {
        graph.add_node(());
    }
    for rule in rules {
        let Some(head) = rule.head else { continue };
        for &b in &rule.pos {
            if !edges[head.slot()].contains(&b) {
                edges[head.slot()].push(b);
                graph.add_edge(NodeIndex::new(head.slot()), NodeIndex::new(b.slot()), ());
            }
        }
    }
    let mut cyclic_sccs: Vec<Vec<Atom>> = tarjan_scc(&graph)
        .into_iter()
        .filter(|scc| scc.len() > 1 || edges[scc[0].index()].contains(&Atom::from_slot(scc[0].index())))
        .map(|scc| {
            let mut atoms: Vec<Atom> = scc.into_iter().map(|n| Atom::from_slot(n.index())).collect();
            atoms.sort_unstable();
            atoms
        })
        .collect();
    cyclic_sccs.sort();
    let tight = cyclic_sccs.is_empty();
    (DependencyGraph { edges, cyclic_sccs }, tight)
}

/// Translates a program into its compiled instance.
pub fn compile(program: &Program) -> CompiledInstance {
    let mut symbols = program.symbols.clone();
    match program.mode {
        Mode::Sat => {
            let nogoods = program
                .clauses
                .iter()
                .filter_map(|c| Nogood::new(c.iter().map(|l| l.complement()).collect(), NogoodOrigin::Completion))
                .collect();
            CompiledInstance {
                mode: Mode::Sat,
                symbols,
                nogoods,
                rules: Vec::new(),
                rule_bodies: Vec::new(),
                graph: DependencyGraph {
                    edges: vec![Vec::new(); program.num_atoms()],
                    cyclic_sccs: Vec::new(),
                },
                tight: true,
                params: program.params.clone(),
            }
        }
        Mode::Asp => {
            let mut rules = program.rules.clone();
            for &c in &program.choices {
                rules.extend(expand_choice(&mut symbols, c));
            }
            for wr in &program.weighted_rules {
                rules.extend(expand_weighted_rule(wr));
            }
            let completion = clark_completion(&mut symbols, &rules);
            let (graph, tight) = analyze_tightness(symbols.len(), &rules);
            CompiledInstance {
                mode: Mode::Asp,
                symbols,
                nogoods: completion.nogoods,
                rules,
                rule_bodies: completion.rule_bodies,
                graph,
                tight,
                params: program.params.clone(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_ground_asp;

    fn compile_text(src: &str) -> (Program, CompiledInstance) {
        let (p, _) = parse_ground_asp(src).unwrap();
        let c = compile(&p);
        (p, c)
    }

    fn lits_of(c: &CompiledInstance) -> Vec<Vec<Lit>> {
        let mut v: Vec<Vec<Lit>> = c.nogoods.iter().map(|n| n.lits().to_vec()).collect();
        v.sort();
        v
    }

    fn sorted(mut v: Vec<Lit>) -> Vec<Lit> {
        v.sort();
        v
    }

    #[test]
    fn single_rule_completion() {
        let (p, c) = compile_text("a :- b, not c.");
        let a = p.symbols.lookup("a").unwrap();
        let b = p.symbols.lookup("b").unwrap();
        let cc = p.symbols.lookup("c").unwrap();
        let beta = c.symbols.lookup("_body1").unwrap();
        assert_eq!(c.kind(beta), AtomKind::BodyAux);
        let mut expected = vec![
            sorted(vec![beta.neg(), b.pos(), cc.neg()]),
            sorted(vec![beta.pos(), b.neg()]),
            sorted(vec![beta.pos(), cc.pos()]),
            sorted(vec![a.pos(), beta.neg()]),
            sorted(vec![a.neg(), beta.pos()]),
            // b and c have no rules
            vec![b.pos()],
            vec![cc.pos()],
        ];
        expected.sort();
        assert_eq!(lits_of(&c), expected);
        let rule_nogoods = c.nogoods.iter().filter(|n| n.lits().iter().any(|l| l.atom() == a || l.atom() == beta));
        assert_eq!(rule_nogoods.count(), 5);
    }

    #[test]
    fn fact_is_unit() {
        let (p, c) = compile_text("a.");
        let a = p.symbols.lookup("a").unwrap();
        assert_eq!(lits_of(&c), vec![vec![a.neg()]]);
    }

    #[test]
    fn atom_without_rules_is_false() {
        let (p, c) = compile_text("p :- q.");
        let q = p.symbols.lookup("q").unwrap();
        assert!(lits_of(&c).contains(&vec![q.pos()]));
    }

    #[test]
    fn constraint_maps_directly() {
        let (p, c) = compile_text("{a}. {b}. :- a, not b.");
        let a = p.symbols.lookup("a").unwrap();
        let b = p.symbols.lookup("b").unwrap();
        assert!(lits_of(&c).contains(&sorted(vec![a.pos(), b.neg()])));
    }

    #[test]
    fn shared_bodies_share_aux() {
        let (_, c) = compile_text("{b}. {d}. a :- b, d. c :- d, b.");
        let aux = c.symbols.atoms().filter(|&x| c.kind(x) == AtomKind::BodyAux).count();
        assert_eq!(aux, 1);
        assert_eq!(c.rule_bodies[0], c.rule_bodies[1]);
    }

    #[test]
    fn clauses_become_negated_nogoods() {
        let (p, _) = crate::frontend::parse_cnf_with_cost("p cnf 3 2\n1 -2 0\n3 -3 0\n").unwrap();
        let c = compile(&p);
        assert_eq!(lits_of(&c), vec![vec![Lit::from_dimacs(-1), Lit::from_dimacs(2)]]);
    }

    #[test]
    fn choice_expansion() {
        let mut symbols = SymbolTable::new();
        let a = symbols.intern("a");
        let [r1, r2] = expand_choice(&mut symbols, a);
        let shadow = symbols.lookup("_not_a").unwrap();
        assert_eq!(symbols.kind(shadow), AtomKind::ChoiceAux);
        assert_eq!(r1, Rule::new(Some(a), vec![], vec![shadow]));
        assert_eq!(r2, Rule::new(Some(shadow), vec![], vec![a]));
    }

    #[test]
    fn weighted_rule_expansion() {
        let (p, _) = parse_ground_asp("{heads}. 0.6 :: win :- heads.").unwrap();
        let wr = &p.weighted_rules[0];
        let win = p.symbols.lookup("win").unwrap();
        let heads = p.symbols.lookup("heads").unwrap();
        let [r1, r2] = expand_weighted_rule(wr);
        assert_eq!(r1, Rule::new(Some(win), vec![heads], vec![wr.aux]));
        assert_eq!(r2, Rule::new(Some(wr.aux), vec![heads], vec![win]));
        assert_eq!(p.weights[&wr.aux], 0.6);
    }

    #[test]
    fn tightness() {
        let (p, c) = compile_text("p :- q. q :- p.");
        assert!(!c.tight);
        let pa = p.symbols.lookup("p").unwrap();
        let qa = p.symbols.lookup("q").unwrap();
        assert_eq!(c.graph.cyclic_sccs, vec![vec![pa, qa]]);

        let (_, c) = compile_text("p :- not q. q :- not p.");
        assert!(c.tight);

        let (_, c) = compile_text("a :- b. b :- c. c.");
        assert!(c.tight);

        let (_, c) = compile_text("p :- p.");
        assert!(!c.tight);
    }
}
