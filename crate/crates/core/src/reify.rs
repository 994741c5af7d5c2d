//! Reified encodings of weighted programs for external ASP solvers: one
//! with `#minimize` statements over squared count differences, one with
//! cardinality bounds around the target counts.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::frontend::Program;
use crate::model::Atom;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReifyError {
    #[error("no weighted atoms to encode")]
    NoWeights,
    #[error("weight {weight} of `{atom}` needs {digits} decimal digits, but nmodels = {nmodels} < 10^{digits}")]
    Precision { atom: String, weight: f64, digits: u32, nmodels: u64 },
    #[error("weight {weight} of `{atom}` has more than 9 decimal digits")]
    Unrepresentable { atom: String, weight: f64 },
}

/// `w = k / 10^d` with the smallest `d`.
fn decimal(w: f64) -> Option<(u64, u32)> {
    (0..=9u32).find_map(|d| {
        let scaled = w * 10f64.powi(d as i32);
        let k = scaled.round();
        ((scaled - k).abs() < 1e-9 * scaled.abs().max(1.0)).then_some((k as u64, d))
    })
}

/// `a` becomes `a(M)`, `p(x,y)` becomes `p(x,y,M)`.
fn with_model(name: &str) -> String {
    match name.strip_suffix(')') {
        Some(open) => format!("{open},M)"),
        None => format!("{name}(M)"),
    }
}

/// Identifier fragment for naming per-atom helper predicates.
fn stem(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect();
    s.trim_end_matches('_').to_string()
}

fn predicate(name: &str) -> (String, usize) {
    match name.split_once('(') {
        None => (name.to_string(), 0),
        Some((p, args)) => {
            let args = args.trim_end_matches(')');
            let mut depth = 0;
            let mut arity = 1;
            for c in args.chars() {
                match c {
                    '(' => depth += 1,
                    ')' => depth -= 1,
                    ',' if depth == 0 => arity += 1,
                    _ => {}
                }
            }
            (p.to_string(), arity)
        }
    }
}

struct Target {
    name: String,
    stem: String,
    k: u64,
    scale: u64,
}

fn targets(program: &Program, weights: &[(Atom, f64)], nmodels: u64) -> Result<Vec<Target>, ReifyError> {
    if weights.is_empty() {
        return Err(ReifyError::NoWeights);
    }
    weights
        .iter()
        .map(|&(a, w)| {
            let name = program.name(a).to_string();
            let (k, d) = decimal(w).ok_or_else(|| ReifyError::Unrepresentable {
                atom: name.clone(),
                weight: w,
            })?;
            let scale = 10u64.pow(d);
            if nmodels < scale {
                return Err(ReifyError::Precision {
                    atom: name,
                    weight: w,
                    digits: d,
                    nmodels,
                });
            }
            Ok(Target {
                stem: stem(&name),
                name,
                k,
                scale,
            })
        })
        .collect()
}

/// Atoms fixed by facts keep their names; everything else gets a model
/// index.
struct Renamer<'a> {
    program: &'a Program,
    facts: HashSet<Atom>,
}

impl<'a> Renamer<'a> {
    fn new(program: &'a Program) -> Self {
        let mut heads: BTreeMap<Atom, (usize, bool)> = BTreeMap::new();
        for r in &program.rules {
            if let Some(h) = r.head {
                let e = heads.entry(h).or_insert((0, false));
                e.0 += 1;
                e.1 |= r.pos.is_empty() && r.neg.is_empty();
            }
        }
        let facts = heads
            .into_iter()
            .filter(|&(a, (_, fact))| fact && !program.choices.contains(&a))
            .map(|(a, _)| a)
            .collect();
        Renamer { program, facts }
    }

    fn atom(&self, a: Atom) -> String {
        let name = self.program.name(a);
        if self.facts.contains(&a) {
            name.to_string()
        } else {
            with_model(name)
        }
    }

    fn is_fact_rule(&self, head: Option<Atom>, pos: &[Atom], neg: &[Atom]) -> bool {
        head.is_some_and(|h| self.facts.contains(&h)) && pos.is_empty() && neg.is_empty()
    }

    /// Renders a rule; `model(M)` is added when requested or when no
    /// positive body atom binds `M`.
    fn rule(&self, head: Option<Atom>, pos: &[Atom], neg: &[Atom], bind_always: bool) -> String {
        if self.is_fact_rule(head, pos, neg) {
            return format!("{}.", self.program.name(head.unwrap()));
        }
        let mut body: Vec<String> = pos.iter().map(|&a| self.atom(a)).collect();
        body.extend(neg.iter().map(|&a| format!("not {}", self.atom(a))));
        let bound = pos.iter().any(|a| !self.facts.contains(a));
        if bind_always || !bound {
            body.push("model(M)".to_string());
        }
        match head {
            Some(h) => format!("{} :- {}.", self.atom(h), body.join(", ")),
            None => format!(":- {}.", body.join(", ")),
        }
    }

    /// All rules of the program, weighted rules expanded over their
    /// auxiliaries.
    fn rules(&self, bind_always: bool) -> Vec<String> {
        let mut out: Vec<String> = self
            .program
            .rules
            .iter()
            .map(|r| self.rule(r.head, &r.pos, &r.neg, bind_always))
            .collect();
        for wr in &self.program.weighted_rules {
            let mut n1 = wr.neg.clone();
            n1.push(wr.aux);
            out.push(self.rule(Some(wr.head), &wr.pos, &n1, bind_always));
            let mut n2 = wr.neg.clone();
            n2.push(wr.head);
            out.push(self.rule(Some(wr.aux), &wr.pos, &n2, bind_always));
        }
        out
    }
}

fn show_lines(program: &Program, weights: &[(Atom, f64)]) -> Vec<String> {
    let mut seen = Vec::new();
    for &(a, _) in weights {
        let (p, arity) = predicate(program.name(a));
        let line = format!("#show {p}/{}.", arity + 1);
        if !seen.contains(&line) {
            seen.push(line);
        }
    }
    seen
}

/// Encoding with one `#minimize` statement per weighted atom over the
/// squared difference between target and actual counts.
pub fn encode_minimize(program: &Program, weights: &[(Atom, f64)], nmodels: u64) -> Result<String, ReifyError> {
    let targets = targets(program, weights, nmodels)?;
    let names = Renamer::new(program);
    let mut out = String::new();
    let _ = writeln!(out, "#const nmodels = {nmodels}.");
    let _ = writeln!(out, "model(1..nmodels).");
    let _ = writeln!(out, "mcount(0..nmodels).");
    for &c in &program.choices {
        let _ = writeln!(out, "{{{}}} :- model(M).", names.atom(c));
    }
    for r in names.rules(true) {
        let _ = writeln!(out, "{r}");
    }
    out.push('\n');
    for t in &targets {
        let _ = writeln!(out, "w{}(nmodels * {} / {}).", t.stem, t.k, t.scale);
    }
    for t in &targets {
        let _ = writeln!(out, "f{}(F) :- F {{ {}: model(M) }} F, mcount(F).", t.stem, with_model(&t.name));
    }
    out.push('\n');
    for t in &targets {
        let _ = writeln!(out, "diff{0}(D) :- D = (W - F)**2, w{0}(W), f{0}(F).", t.stem);
    }
    for t in &targets {
        let var = format!("D{}", t.stem.to_uppercase());
        let _ = writeln!(out, "#minimize {{ {var} : diff{}({var}) }}.", t.stem);
    }
    out.push('\n');
    for line in show_lines(program, weights) {
        let _ = writeln!(out, "{line}");
    }
    Ok(out)
}

/// Encoding as bounded counts: every weighted atom must hold in strictly
/// between `W - tol` and `W + tol` of the models, `W` its target count.
pub fn encode_equation(
    program: &Program,
    weights: &[(Atom, f64)],
    nmodels: u64,
    tol: u64,
    multiplier: u64,
) -> Result<String, ReifyError> {
    let targets = targets(program, weights, nmodels)?;
    let names = Renamer::new(program);
    let mut out = String::new();
    let _ = writeln!(out, "#const tol = {tol}.");
    let _ = writeln!(out, "#const multiplier = {multiplier}.");
    let _ = writeln!(out, "#const nmodels = {nmodels}.");
    let _ = writeln!(out, "model(1..nmodels).");
    out.push('\n');
    for t in &targets {
        let _ = writeln!(out, "w{}(nmodels * {} * multiplier / ({} * multiplier)).", t.stem, t.k, t.scale);
        let _ = writeln!(out, "W-tol < {{ {}: model(M) }} < W+tol :- w{}(W).", with_model(&t.name), t.stem);
    }
    if !program.choices.is_empty() {
        out.push('\n');
        for (k, &c) in program.choices.iter().enumerate() {
            let _ = writeln!(out, "1{{__aux_{}(M);{}}}1 :- model(M).", k + 1, names.atom(c));
        }
    }
    let rules = names.rules(false);
    if !rules.is_empty() {
        out.push('\n');
        for r in rules {
            let _ = writeln!(out, "{r}");
        }
    }
    out.push('\n');
    for line in show_lines(program, weights) {
        let _ = writeln!(out, "{line}");
    }
    Ok(out)
}

/// Reads reified atoms such as `a(3)` or `p(x,7)` from solver output and
/// returns, per atom name, the fraction of the `nmodels` model indices in
/// which it holds.
pub fn decode_frequencies(answer: &str, nmodels: u64) -> BTreeMap<String, f64> {
    let mut seen: BTreeMap<String, HashSet<u64>> = BTreeMap::new();
    for token in answer.split_whitespace() {
        let Some(body) = token.strip_suffix(')') else { continue };
        let Some(open) = body.find('(') else { continue };
        let (pred, args) = (&body[..open], &body[open + 1..]);
        let (rest, index) = match args.rsplit_once(',') {
            Some((rest, m)) => (Some(rest), m),
            None => (None, args),
        };
        let Ok(m) = index.trim().parse::<u64>() else { continue };
        let name = match rest {
            Some(r) => format!("{pred}({r})"),
            None => pred.to_string(),
        };
        seen.entry(name).or_default().insert(m);
    }
    seen.into_iter()
        .map(|(name, models)| (name, models.len() as f64 / nmodels as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_ground_asp;

    fn example() -> Program {
        parse_ground_asp("{a}. {b}. 0.2 :: a. 0.6 :: b. :- a, b.").unwrap().0
    }

    #[test]
    fn decimals() {
        assert_eq!(decimal(0.2), Some((2, 1)));
        assert_eq!(decimal(0.25), Some((25, 2)));
        assert_eq!(decimal(1.0), Some((1, 0)));
        assert_eq!(decimal(0.0), Some((0, 0)));
        assert_eq!(decimal(0.1234), Some((1234, 4)));
    }

    #[test]
    fn minimize_contains_listing_lines() {
        let p = example();
        let text = encode_minimize(&p, &p.weighted_params(), 10).unwrap();
        assert!(text.contains("wa(nmodels * 2 / 10)."));
        assert!(text.contains("#minimize { DA : diffa(DA) }."));
        let text = encode_minimize(&p, &p.weighted_params(), 100).unwrap();
        assert!(text.starts_with("#const nmodels = 100."));
        assert!(text.contains("wb(nmodels * 6 / 10)."));
    }

    #[test]
    fn precision_error() {
        let p = parse_ground_asp("0.25 :: a.").unwrap().0;
        assert!(matches!(
            encode_minimize(&p, &p.weighted_params(), 10),
            Err(ReifyError::Precision { digits: 2, nmodels: 10, .. })
        ));
        assert!(encode_minimize(&p, &p.weighted_params(), 100).is_ok());
        assert_eq!(encode_minimize(&p, &[], 100), Err(ReifyError::NoWeights));
    }

    #[test]
    fn equation_contains_listing_lines() {
        let p = example();
        let text = encode_equation(&p, &p.weighted_params(), 400, 3, 100).unwrap();
        assert!(text.contains("wa(nmodels * 2 * multiplier / (10 * multiplier))."));
        assert!(text.contains("W-tol < { a(M): model(M) } < W+tol :- wa(W)."));
        assert!(text.contains("1{__aux_1(M);a(M)}1 :- model(M)."));
    }

    #[test]
    fn single_atom_equation() {
        let p = parse_ground_asp("0.5 :: a.").unwrap().0;
        let text = encode_equation(&p, &p.weighted_params(), 400, 20, 100).unwrap();
        assert_eq!(text.matches(" < W+tol").count(), 1);
        assert_eq!(text.matches("__aux_").count(), 1);
    }

    #[test]
    fn compound_atoms_and_facts() {
        let p = parse_ground_asp("coin(1). 0.6 :: coin_out(1,heads). win :- coin_out(1,heads), coin(1).").unwrap().0;
        let text = encode_equation(&p, &p.weighted_params(), 10, 1, 100).unwrap();
        assert!(text.contains("coin(1).\n"));
        assert!(text.contains("win(M) :- coin_out(1,heads,M), coin(1)."));
        assert!(text.contains("wcoin_out_1_heads(nmodels * 6 * multiplier / (10 * multiplier))."));
        assert!(text.contains("#show coin_out/3."));
    }

    #[test]
    fn decoder_round_trip() {
        // 10 models: a in models 1 and 2, b in models 3..=8.
        let answer = "a(1) a(2) b(3) b(4) b(5) b(6) b(7) b(8) __aux_1(3) fa(2)";
        let f = decode_frequencies(answer, 10);
        assert!((f["a"] - 0.2).abs() <= 3.0 / 10.0);
        assert_eq!(f["a"], 0.2);
        assert_eq!(f["b"], 0.6);
        let f = decode_frequencies("p(x,1) p(x,2) p(y,2)", 4);
        assert_eq!(f["p(x)"], 0.5);
        assert_eq!(f["p(y)"], 0.25);
    }
}
