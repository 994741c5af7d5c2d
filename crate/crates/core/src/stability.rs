//! Model extraction, stable-model verification by reduct and least model,
//! and loop nogoods for unfounded candidates.

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::frontend::Mode;
use crate::model::{Atom, AtomKind, Lit, Model, Nogood, NogoodOrigin};
use crate::transform::CompiledInstance;

/// The true visible atoms of a complete assignment. Body and choice
/// auxiliaries are dropped; weighted-rule auxiliaries stay so that they can
/// be counted, and are hidden when models are printed.
pub fn extract_model(instance: &CompiledInstance, values: &[bool]) -> Model {
    values
        .iter()
        .enumerate()
        .filter(|&(_, &v)| v)
        .map(|(slot, _)| Atom::from_slot(slot))
        .filter(|&a| instance.is_visible(a))
        .collect()
}

/// Outcome of the reduct check.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReductResult {
    pub least_model: Vec<Atom>,
    /// Candidate atoms missing from the least model.
    pub unfounded: Vec<Atom>,
}

/// Precomputed occurrence lists for repeated reduct checks.
#[derive(Debug, Clone)]
pub struct StabilityChecker {
    /// Rules (by index) with each atom in their positive body.
    pos_occurrences: Vec<Vec<usize>>,
}

impl StabilityChecker {
    pub fn new(instance: &CompiledInstance) -> StabilityChecker {
        let mut pos_occurrences = vec![Vec::new(); instance.num_atoms()];
        for (i, rule) in instance.rules.iter().enumerate() {
            for &b in &rule.pos {
                if !pos_occurrences[b.slot()].contains(&i) {
                    pos_occurrences[b.slot()].push(i);
                }
            }
        }
        StabilityChecker { pos_occurrences }
    }

    /// Compares the candidate with the least model of its reduct. Atoms that
    /// occur in no rule (body auxiliaries) are ignored.
    pub fn check(&self, instance: &CompiledInstance, values: &[bool]) -> (bool, ReductResult) {
        let n = instance.num_atoms();
        let mut missing: Vec<usize> = Vec::with_capacity(instance.rules.len());
        let mut derived = vec![false; n];
        let mut queue = Vec::new();
        let derive = |h: Atom, derived: &mut Vec<bool>, queue: &mut Vec<Atom>| {
            if !derived[h.slot()] {
                derived[h.slot()] = true;
                queue.push(h);
            }
        };
        for rule in &instance.rules {
            let blocked = rule.head.is_none() || rule.neg.iter().any(|a| values[a.slot()]);
            let mut distinct = rule.pos.clone();
            distinct.sort_unstable();
            distinct.dedup();
            // Rules removed by the reduct never fire.
            missing.push(if blocked { usize::MAX } else { distinct.len() });
        }
        for (i, rule) in instance.rules.iter().enumerate() {
            if missing[i] == 0 {
                derive(rule.head.unwrap(), &mut derived, &mut queue);
            }
        }
        while let Some(a) = queue.pop() {
            for &i in &self.pos_occurrences[a.slot()] {
                if missing[i] != usize::MAX {
                    missing[i] -= 1;
                    if missing[i] == 0 {
                        derive(instance.rules[i].head.unwrap(), &mut derived, &mut queue);
                    }
                }
            }
        }
        let mut result = ReductResult::default();
        for slot in 0..n {
            let atom = Atom::from_slot(slot);
            if instance.kind(atom) == AtomKind::BodyAux {
                continue;
            }
            if derived[slot] {
                result.least_model.push(atom);
            }
            if values[slot] && !derived[slot] {
                result.unfounded.push(atom);
            }
        }
        let stable = result.unfounded.is_empty()
            && result.least_model.iter().all(|a| values[a.slot()]);
        (stable, result)
    }
}

/// Whether the complete assignment `values` is a stable model.
pub fn is_stable(instance: &CompiledInstance, values: &[bool]) -> (bool, ReductResult) {
    StabilityChecker::new(instance).check(instance, values)
}

/// Loop nogoods for the unfounded atoms of a candidate: for every cyclic
/// SCC `L` of the positive dependency graph restricted to `unfounded`, and
/// each `a` in `L`, the nogood `{T a} ∪ {F B : B external body of L}`.
/// If none of them is violated by `values`, nogoods for the whole unfounded
/// set are added so that the candidate is always excluded.
pub fn loop_nogoods(instance: &CompiledInstance, unfounded: &[Atom], values: &[bool]) -> Vec<Nogood> {
    let mut in_u = vec![usize::MAX; instance.num_atoms()];
    for (i, &a) in unfounded.iter().enumerate() {
        in_u[a.slot()] = i;
    }
    let mut graph = DiGraph::<Atom, ()>::with_capacity(unfounded.len(), 0);
    for &a in unfounded {
        graph.add_node(a);
    }
    for &a in unfounded {
        for &b in instance.graph.successors(a) {
            if in_u[b.slot()] != usize::MAX {
                graph.add_edge(NodeIndex::new(in_u[a.slot()]), NodeIndex::new(in_u[b.slot()]), ());
            }
        }
    }
    let mut loops: Vec<Vec<Atom>> = tarjan_scc(&graph)
        .into_iter()
        .map(|scc| scc.into_iter().map(|n| graph[n]).collect::<Vec<Atom>>())
        .filter(|scc| scc.len() > 1 || instance.graph.successors(scc[0]).contains(&scc[0]))
        .collect();
    for l in &mut loops {
        l.sort_unstable();
    }
    loops.sort();

    let mut out: Vec<Nogood> = loops.iter().flat_map(|l| nogoods_for_set(instance, l)).collect();
    let excludes = |ngs: &[Nogood]| ngs.iter().any(|g| g.violated_by(|a: Atom| values[a.slot()]));
    if !excludes(&out) {
        let mut whole = unfounded.to_vec();
        whole.sort_unstable();
        out.extend(nogoods_for_set(instance, &whole));
    }
    out.sort_by(|x, y| x.lits().cmp(y.lits()));
    out.dedup();
    out
}

fn nogoods_for_set(instance: &CompiledInstance, set: &[Atom]) -> Vec<Nogood> {
    let member = |a: &Atom| set.binary_search(a).is_ok();
    let mut external: Vec<Lit> = Vec::new();
    for (rule, body) in instance.rules.iter().zip(&instance.rule_bodies) {
        let Some(h) = rule.head else { continue };
        if !member(&h) || rule.pos.iter().any(member) {
            continue;
        }
        match body {
            // A fact supports its head unconditionally.
            None => return Vec::new(),
            Some(b) => {
                if !external.contains(&b.complement()) {
                    external.push(b.complement());
                }
            }
        }
    }
    set.iter()
        .filter_map(|a| {
            let mut lits = vec![a.pos()];
            lits.extend_from_slice(&external);
            Nogood::new(lits, NogoodOrigin::Loop)
        })
        .collect()
}

/// Whether a candidate must be checked: ASP mode and a non-tight program.
pub fn needs_check(instance: &CompiledInstance) -> bool {
    instance.mode == Mode::Asp && !instance.tight
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_ground_asp;
    use crate::transform::compile;

    fn compiled(src: &str) -> CompiledInstance {
        compile(&parse_ground_asp(src).unwrap().0)
    }

    fn values(c: &CompiledInstance, true_atoms: &[&str]) -> Vec<bool> {
        let mut v = vec![false; c.num_atoms()];
        for name in true_atoms {
            v[c.symbols.lookup(name).unwrap().slot()] = true;
        }
        v
    }

    fn names(c: &CompiledInstance, atoms: &[Atom]) -> Vec<String> {
        atoms.iter().map(|&a| c.symbols.name(a).to_string()).collect()
    }

    #[test]
    fn extraction_strips_auxiliaries() {
        let c = compiled("{a}. b :- a, not c. {c}.");
        let v = values(&c, &["a", "b", "_body1", "_not_c"]);
        let m = extract_model(&c, &v);
        assert_eq!(names(&c, m.atoms()), vec!["a", "b"]);
        assert!(extract_model(&c, &vec![false; c.num_atoms()]).is_empty());
    }

    #[test]
    fn positive_loop_is_unfounded() {
        let c = compiled("p :- q. q :- p.");
        let (stable, r) = is_stable(&c, &values(&c, &["p", "q"]));
        assert!(!stable);
        assert_eq!(names(&c, &r.unfounded), vec!["p", "q"]);
        assert!(r.least_model.is_empty());
    }

    #[test]
    fn even_negative_loop_is_stable() {
        let c = compiled("p :- not q. q :- not p.");
        let (stable, r) = is_stable(&c, &values(&c, &["p"]));
        assert!(stable);
        assert_eq!(names(&c, &r.least_model), vec!["p"]);
    }

    #[test]
    fn four_rule_loop_nogoods() {
        let c = compiled("p :- q. q :- p. p :- not r. r :- not p.");
        let v = values(&c, &["p", "q"]);
        let (stable, r) = is_stable(&c, &v);
        assert!(stable, "p is supported externally by not r");
        assert!(r.unfounded.is_empty());

        // Without the external support applying, {p, q} is unfounded.
        let c = compiled("p :- q. q :- p. p :- not r. {r}.");
        let v = values(&c, &["p", "q", "r"]);
        let (stable, r) = is_stable(&c, &v);
        assert!(!stable);
        let ngs = loop_nogoods(&c, &r.unfounded, &v);
        let (p, q, rr) = (c.symbols.lookup("p").unwrap(), c.symbols.lookup("q").unwrap(), c.symbols.lookup("r").unwrap());
        let mut expected = vec![
            Nogood::new(vec![p.pos(), rr.pos()], NogoodOrigin::Loop).unwrap(),
            Nogood::new(vec![q.pos(), rr.pos()], NogoodOrigin::Loop).unwrap(),
        ];
        expected.sort_by(|x, y| x.lits().cmp(y.lits()));
        assert_eq!(ngs, expected);
        assert!(ngs.iter().any(|g| g.violated_by(|a: Atom| v[a.slot()])));
    }

    #[test]
    fn unsupported_loop_gets_unit_nogoods() {
        let c = compiled("p :- q. q :- p.");
        let v = values(&c, &["p", "q"]);
        let ngs = loop_nogoods(&c, &is_stable(&c, &v).1.unfounded, &v);
        let lits: Vec<Vec<Lit>> = ngs.iter().map(|g| g.lits().to_vec()).collect();
        let (p, q) = (c.symbols.lookup("p").unwrap(), c.symbols.lookup("q").unwrap());
        assert_eq!(lits, vec![vec![p.pos()], vec![q.pos()]]);
    }

    #[test]
    fn self_loop() {
        let c = compiled("p :- p.");
        let v = values(&c, &["p"]);
        let (stable, r) = is_stable(&c, &v);
        assert!(!stable);
        let ngs = loop_nogoods(&c, &r.unfounded, &v);
        let p = c.symbols.lookup("p").unwrap();
        assert_eq!(ngs, vec![Nogood::new(vec![p.pos()], NogoodOrigin::Loop).unwrap()]);
    }

    #[test]
    fn unfounded_chain_above_loop() {
        // s depends on the loop but is not part of it; the bottom loop is
        // still caught.
        let c = compiled("p :- q. q :- p. s :- p. {t}. p :- t.");
        let v = values(&c, &["p", "q", "s", "_not_t"]);
        let (stable, r) = is_stable(&c, &v);
        assert!(!stable);
        assert_eq!(names(&c, &r.unfounded), vec!["p", "q", "s"]);
        let ngs = loop_nogoods(&c, &r.unfounded, &v);
        assert!(ngs.iter().any(|g| g.violated_by(|a: Atom| v[a.slot()])));
        assert!(ngs.iter().all(|g| !g.lits().contains(&c.symbols.lookup("s").unwrap().pos())));
    }
}
