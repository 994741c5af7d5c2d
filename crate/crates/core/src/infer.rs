//! Probabilistic inference on top of sampling: MSE cost synthesis from
//! weights, marginal and MAP queries, and conditional-probability costs.

use std::collections::HashMap;

use crate::diffbranch::CostSpec;
use crate::frontend::{CostExpr, Program, ProgramError, Rule};
use crate::model::{Atom, AtomKind, Model, SampleError};

/// `((φ₁ - f(θ₁))^2 + ... + (φₙ - f(θₙ))^2) / n`, without the division when
/// `n = 1`.
pub fn synthesize_mse(weights: &[(Atom, f64)]) -> CostExpr {
    assert!(!weights.is_empty(), "MSE needs at least one weighted atom");
    let term = |&(a, w): &(Atom, f64)| CostExpr::pow(CostExpr::sub(CostExpr::Const(w), CostExpr::freq(a)), 2);
    let mut sum = term(&weights[0]);
    for w in &weights[1..] {
        sum = CostExpr::add(sum, term(w));
    }
    if weights.len() > 1 {
        CostExpr::div(sum, CostExpr::Const(weights.len() as f64))
    } else {
        sum
    }
}

/// The program's cost: the MSE of its weights plus any explicit cost
/// expression. `None` when there is neither.
pub fn program_cost(program: &Program, explicit: Option<&CostExpr>) -> Option<CostSpec> {
    let weights = program.weighted_params();
    match (weights.is_empty(), explicit) {
        (true, None) => None,
        (false, None) if weights.len() == program.params.len() => Some(CostSpec::mse(&weights)),
        (false, None) => Some(CostSpec::new(synthesize_mse(&weights), program.params.clone()).ok()?),
        (true, Some(e)) => CostSpec::new(e.clone(), program.params.clone()).ok(),
        (false, Some(e)) => {
            CostSpec::new(CostExpr::add(synthesize_mse(&weights), e.clone()), program.params.clone()).ok()
        }
    }
}

/// Frequency of `atom` among `models`.
pub fn marginal(models: &[Model], atom: Atom) -> Result<f64, SampleError> {
    if models.is_empty() {
        return Err(SampleError::EmptySample);
    }
    let count = models.iter().filter(|m| m.contains(atom)).count();
    Ok(count as f64 / models.len() as f64)
}

/// The most frequent model projected onto `queries`; ties go to the model
/// that occurs first.
pub fn map_model(models: &[Model], queries: &[Atom]) -> Result<Model, SampleError> {
    if models.is_empty() {
        return Err(SampleError::EmptySample);
    }
    let mut tally: HashMap<&Model, (usize, usize)> = HashMap::new();
    for (i, m) in models.iter().enumerate() {
        tally.entry(m).or_insert((0, i)).0 += 1;
    }
    let (best, _) = tally
        .into_iter()
        .max_by(|(_, (c1, i1)), (_, (c2, i2))| c1.cmp(c2).then(i2.cmp(i1)))
        .unwrap();
    Ok(best.project(queries))
}

/// Adds `aux :- p, q.`, `p :- aux.` and `q :- aux.` over a fresh parameter
/// `aux`, makes `q` a parameter, and returns `(target - f(aux)/f(q))^2`.
pub fn conditional_cost(program: &mut Program, p: Atom, q: Atom, target: f64) -> Result<(CostExpr, Atom), ProgramError> {
    if !(0.0..=1.0).contains(&target) {
        return Err(ProgramError::WeightOutOfRange {
            atom: program.name(p).to_string(),
            weight: target,
        });
    }
    if !program.choices.contains(&q) && !program.weights.contains_key(&q) {
        return Err(ProgramError::NotUncertain(program.name(q).to_string()));
    }
    let aux = program.symbols.fresh("cond", AtomKind::WeightAux);
    program.rules.push(Rule::new(Some(aux), vec![p, q], vec![]));
    program.rules.push(Rule::new(Some(p), vec![aux], vec![]));
    program.rules.push(Rule::new(Some(q), vec![aux], vec![]));
    program.add_param(aux);
    program.add_param(q);
    let cost = CostExpr::pow(
        CostExpr::sub(CostExpr::Const(target), CostExpr::div(CostExpr::freq(aux), CostExpr::freq(q))),
        2,
    );
    Ok((cost, aux))
}
