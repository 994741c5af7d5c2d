//! Gradient-guided branching: symbolic partial derivatives of the cost,
//! ranking of parameter literals, and the decision heuristic built on them.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::engine::{ActivityHeuristic, Assignment, BranchingHeuristic, Decision};
use crate::frontend::CostExpr;
use crate::model::{Atom, Lit, SampleAccumulator};

pub const DEFAULT_NOISE: f64 = 0.001;

/// A cost evaluation hit a point where the expression is undefined.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct SingularityError {
    pub kind: SingularityKind,
    /// The offending subexpression.
    pub expr: CostExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularityKind {
    DivisionByZero,
    NegativeSqrt,
    NonFinite,
}

impl fmt::Display for SingularityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SingularityKind::DivisionByZero => "division by zero",
            SingularityKind::NegativeSqrt => "square root of a negative number",
            SingularityKind::NonFinite => "non-finite value",
        })
    }
}

impl fmt::Display for SingularityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in {}", self.kind, self.expr.render(&|a: Atom| format!("#{}", a.index())))
    }
}

impl SingularityError {
    /// Describes the error with atoms printed by `name`.
    pub fn describe(&self, name: &dyn Fn(Atom) -> String) -> String {
        format!("{} in {}", self.kind, self.expr.render(name))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostSpecError {
    #[error("cost refers to atom #{} which is not a parameter", .0.index())]
    NotAParameter(Atom),
}

fn is_zero(e: &CostExpr) -> bool {
    matches!(e, CostExpr::Const(c) if *c == 0.0)
}

fn is_one(e: &CostExpr) -> bool {
    matches!(e, CostExpr::Const(c) if *c == 1.0)
}

fn konst(e: &CostExpr) -> Option<f64> {
    match e {
        CostExpr::Const(c) => Some(*c),
        _ => None,
    }
}

// Simplifying constructors. Only identities and constant folding; terms are
// never reassociated.

fn s_add(x: CostExpr, y: CostExpr) -> CostExpr {
    match (konst(&x), konst(&y)) {
        (Some(a), Some(b)) => CostExpr::Const(a + b),
        _ if is_zero(&y) => x,
        _ if is_zero(&x) => y,
        _ => CostExpr::add(x, y),
    }
}

fn s_sub(x: CostExpr, y: CostExpr) -> CostExpr {
    match (konst(&x), konst(&y)) {
        (Some(a), Some(b)) => CostExpr::Const(a - b),
        _ if is_zero(&y) => x,
        _ => CostExpr::sub(x, y),
    }
}

fn s_mul(x: CostExpr, y: CostExpr) -> CostExpr {
    match (konst(&x), konst(&y)) {
        (Some(a), Some(b)) => CostExpr::Const(a * b),
        _ if is_zero(&x) || is_zero(&y) => CostExpr::Const(0.0),
        _ if is_one(&y) => x,
        _ if is_one(&x) => y,
        _ => CostExpr::mul(x, y),
    }
}

fn s_div(x: CostExpr, y: CostExpr) -> CostExpr {
    match (konst(&x), konst(&y)) {
        (Some(a), Some(b)) if b != 0.0 => CostExpr::Const(a / b),
        _ if is_one(&y) => x,
        _ => CostExpr::div(x, y),
    }
}

fn s_pow(x: CostExpr, k: i32) -> CostExpr {
    match (k, konst(&x)) {
        (0, _) => CostExpr::Const(1.0),
        (1, _) => x,
        (_, Some(a)) if a != 0.0 || k > 0 => CostExpr::Const(powi(a, k)),
        _ => CostExpr::pow(x, k),
    }
}

/// Integer power by repeated multiplication, so that `x^2` is exactly `x*x`.
fn powi(x: f64, k: i32) -> f64 {
    let mut r = 1.0;
    for _ in 0..k.unsigned_abs() {
        r *= x;
    }
    if k < 0 {
        1.0 / r
    } else {
        r
    }
}

/// Symbolic partial derivative of `e` with respect to the frequency of `x`.
pub fn derivative(e: &CostExpr, x: Atom) -> CostExpr {
    use CostExpr::*;
    match e {
        Const(_) => Const(0.0),
        Freq(a) => Const(if *a == x { 1.0 } else { 0.0 }),
        Add(u, v) => s_add(derivative(u, x), derivative(v, x)),
        Sub(u, v) => s_sub(derivative(u, x), derivative(v, x)),
        Mul(u, v) => s_add(
            s_mul(derivative(u, x), (**v).clone()),
            s_mul((**u).clone(), derivative(v, x)),
        ),
        Div(u, v) => {
            let dv = derivative(v, x);
            if is_zero(&dv) {
                s_div(derivative(u, x), (**v).clone())
            } else {
                let num = s_sub(
                    s_mul(derivative(u, x), (**v).clone()),
                    s_mul((**u).clone(), dv),
                );
                s_div(num, s_pow((**v).clone(), 2))
            }
        }
        Pow(u, k) => s_mul(
            s_mul(Const(*k as f64), s_pow((**u).clone(), k - 1)),
            derivative(u, x),
        ),
        Abs(u) => s_mul(Sign(u.clone()), derivative(u, x)),
        Sqrt(u) => s_div(derivative(u, x), s_mul(Const(2.0), Sqrt(u.clone()))),
        Sign(_) => Const(0.0),
    }
}

fn singular(kind: SingularityKind, e: &CostExpr) -> SingularityError {
    SingularityError { kind, expr: e.clone() }
}

/// Evaluates `e` with `value` giving each atom's frequency.
pub fn evaluate(e: &CostExpr, value: &dyn Fn(Atom) -> f64) -> Result<f64, SingularityError> {
    use CostExpr::*;
    let r = match e {
        Const(c) => *c,
        Freq(a) => value(*a),
        Add(u, v) => evaluate(u, value)? + evaluate(v, value)?,
        Sub(u, v) => evaluate(u, value)? - evaluate(v, value)?,
        Mul(u, v) => evaluate(u, value)? * evaluate(v, value)?,
        Div(u, v) => {
            let n = evaluate(u, value)?;
            let d = evaluate(v, value)?;
            if d == 0.0 {
                return Err(singular(SingularityKind::DivisionByZero, e));
            }
            n / d
        }
        Pow(u, k) => {
            let b = evaluate(u, value)?;
            if b == 0.0 && *k < 0 {
                return Err(singular(SingularityKind::DivisionByZero, e));
            }
            powi(b, *k)
        }
        Abs(u) => evaluate(u, value)?.abs(),
        Sqrt(u) => {
            let b = evaluate(u, value)?;
            if b < 0.0 {
                return Err(singular(SingularityKind::NegativeSqrt, e));
            }
            b.sqrt()
        }
        Sign(u) => {
            let b = evaluate(u, value)?;
            if b > 0.0 {
                1.0
            } else if b < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    };
    if r.is_finite() {
        Ok(r)
    } else {
        Err(singular(SingularityKind::NonFinite, e))
    }
}

/// A cost function over parameter frequencies with precomputed symbolic
/// partials.
#[derive(Debug, Clone)]
pub struct CostSpec {
    expr: CostExpr,
    params: Vec<Atom>,
    partials: Vec<CostExpr>,
    position: HashMap<Atom, usize>,
    /// Targets when the expression is a synthesized MSE.
    mse_targets: Option<Vec<f64>>,
    fast_mse: bool,
}

impl CostSpec {
    /// Every atom in `expr` must be listed in `params`.
    pub fn new(expr: CostExpr, params: Vec<Atom>) -> Result<CostSpec, CostSpecError> {
        let position: HashMap<Atom, usize> = params.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        if let Some(&a) = expr.atoms().iter().find(|a| !position.contains_key(a)) {
            return Err(CostSpecError::NotAParameter(a));
        }
        let partials = params.iter().map(|&p| derivative(&expr, p)).collect();
        Ok(CostSpec {
            expr,
            params,
            partials,
            position,
            mse_targets: None,
            fast_mse: false,
        })
    }

    /// The MSE cost for `weights`, flagged so that the closed-form partials
    /// can be enabled with [`set_fast_mse`](Self::set_fast_mse).
    pub fn mse(weights: &[(Atom, f64)]) -> CostSpec {
        let expr = crate::infer::synthesize_mse(weights);
        let params = weights.iter().map(|&(a, _)| a).collect();
        let mut spec = CostSpec::new(expr, params).expect("MSE atoms are its parameters");
        spec.mse_targets = Some(weights.iter().map(|&(_, w)| w).collect());
        spec
    }

    /// A cost that is constant zero over `params`.
    pub fn zero(params: Vec<Atom>) -> CostSpec {
        CostSpec::new(CostExpr::Const(0.0), params).unwrap()
    }

    pub fn expr(&self) -> &CostExpr {
        &self.expr
    }

    pub fn params(&self) -> &[Atom] {
        &self.params
    }

    pub fn partial_exprs(&self) -> &[CostExpr] {
        &self.partials
    }

    pub fn is_mse(&self) -> bool {
        self.mse_targets.is_some()
    }

    /// Uses closed-form MSE partials instead of the symbolic ones. Results
    /// are identical; has no effect on non-MSE costs.
    pub fn set_fast_mse(&mut self, on: bool) {
        self.fast_mse = on;
    }

    fn lookup<'a>(&'a self, beta: &'a [f64]) -> impl Fn(Atom) -> f64 + 'a {
        move |a: Atom| beta[self.position[&a]]
    }

    /// Cost at `beta`, given in parameter order.
    pub fn eval_cost(&self, beta: &[f64]) -> Result<f64, SingularityError> {
        assert_eq!(beta.len(), self.params.len());
        if let (true, Some(targets)) = (self.fast_mse, &self.mse_targets) {
            let mut sum = 0.0;
            for (i, (&b, &t)) in beta.iter().zip(targets).enumerate() {
                let d = t - b;
                sum = if i == 0 { d * d } else { sum + d * d };
            }
            return Ok(if targets.len() > 1 { sum / targets.len() as f64 } else { sum });
        }
        evaluate(&self.expr, &self.lookup(beta))
    }

    /// Gradient at `beta`, in parameter order.
    pub fn eval_partials(&self, beta: &[f64]) -> Result<Vec<f64>, SingularityError> {
        assert_eq!(beta.len(), self.params.len());
        if let (true, Some(targets)) = (self.fast_mse, &self.mse_targets) {
            let n = targets.len();
            return Ok(beta
                .iter()
                .zip(targets)
                .map(|(&b, &t)| {
                    let g = 2.0 * (b - t);
                    if n > 1 {
                        g / n as f64
                    } else {
                        g
                    }
                })
                .collect());
        }
        let value = self.lookup(beta);
        self.partials.iter().map(|d| evaluate(d, &value)).collect()
    }
}

/// Parameter literals sorted by ascending score, rebuilt once per model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRanking {
    pub scores: Vec<(Lit, f64)>,
    /// Sample size the ranking was computed from.
    pub epoch: u64,
    /// Set when the partials could not be evaluated; all scores are then
    /// zero.
    pub singular: Option<SingularityError>,
}

impl ParamRanking {
    /// Scores `∂` for `T p` and `-∂` for `F p`; ties go to the lower atom
    /// index, positive literal first.
    pub fn from_partials(params: &[Atom], partials: &[f64], epoch: u64) -> ParamRanking {
        let mut scores = Vec::with_capacity(2 * params.len());
        for (&p, &d) in params.iter().zip(partials) {
            scores.push((p.pos(), d));
            scores.push((p.neg(), 0.0 - d));
        }
        scores.sort_by(|(l1, s1), (l2, s2)| {
            s1.partial_cmp(s2)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(l1.atom().cmp(&l2.atom()))
                .then(l2.is_positive().cmp(&l1.is_positive()))
        });
        ParamRanking {
            scores,
            epoch,
            singular: None,
        }
    }

    pub fn best(&self) -> Option<(Lit, f64)> {
        self.scores.first().copied()
    }

    pub fn score(&self, lit: Lit) -> Option<f64> {
        self.scores.iter().find(|(l, _)| *l == lit).map(|&(_, s)| s)
    }
}

/// Ranks parameter literals by the gradient at the sample's current
/// frequencies (all zero for an empty sample).
pub fn rebuild_ranking(spec: &CostSpec, acc: &SampleAccumulator) -> ParamRanking {
    let beta = beta_for(spec, acc);
    match spec.eval_partials(&beta) {
        Ok(g) => ParamRanking::from_partials(spec.params(), &g, acc.size()),
        Err(e) => {
            let mut r = ParamRanking::from_partials(spec.params(), &vec![0.0; spec.params().len()], acc.size());
            r.singular = Some(e);
            r
        }
    }
}

/// Frequencies of the spec's parameters in `acc`, zero when empty.
pub fn beta_for(spec: &CostSpec, acc: &SampleAccumulator) -> Vec<f64> {
    if spec.params() == acc.params() {
        return acc.beta();
    }
    let all = acc.beta();
    spec.params()
        .iter()
        .map(|p| {
            let i = acc.params().iter().position(|q| q == p).expect("cost parameter tracked by the sample");
            all[i]
        })
        .collect()
}

/// The gradient-guided branching heuristic: the best-ranked unassigned
/// parameter literal, flipped with probability `noise`; the activity
/// heuristic once every parameter atom is assigned.
#[derive(Debug, Clone)]
pub struct DiffBranch {
    ranking: Arc<ParamRanking>,
    noise: f64,
    lookahead: Option<Lookahead>,
}

/// State for recomputing the ranking at every decision from the sample
/// extended by the current partial assignment.
#[derive(Debug, Clone)]
struct Lookahead {
    spec: Arc<CostSpec>,
    counts: Vec<u64>,
    size: u64,
}

impl DiffBranch {
    pub fn new(ranking: Arc<ParamRanking>, noise: f64) -> DiffBranch {
        DiffBranch {
            ranking,
            noise,
            lookahead: None,
        }
    }

    /// Recomputes scores at each decision, counting the parameters true in
    /// the partial assignment as one extra model.
    pub fn with_lookahead(spec: Arc<CostSpec>, acc: &SampleAccumulator, noise: f64) -> DiffBranch {
        let ranking = Arc::new(rebuild_ranking(&spec, acc));
        let counts = spec
            .params()
            .iter()
            .map(|p| {
                let i = acc.params().iter().position(|q| q == p).unwrap();
                acc.counts()[i]
            })
            .collect();
        DiffBranch {
            ranking,
            noise,
            lookahead: Some(Lookahead {
                spec,
                counts,
                size: acc.size(),
            }),
        }
    }

    pub fn ranking(&self) -> &ParamRanking {
        &self.ranking
    }

    fn current_ranking(&self, assignment: &Assignment) -> Option<ParamRanking> {
        let la = self.lookahead.as_ref()?;
        let size = (la.size + 1) as f64;
        let beta: Vec<f64> = la
            .spec
            .params()
            .iter()
            .zip(&la.counts)
            .map(|(&p, &c)| (c + (assignment.value(p) == Some(true)) as u64) as f64 / size)
            .collect();
        let g = la.spec.eval_partials(&beta).ok()?;
        Some(ParamRanking::from_partials(la.spec.params(), &g, la.size))
    }
}

impl BranchingHeuristic for DiffBranch {
    fn choose_decision(&mut self, assignment: &Assignment, fallback: &mut ActivityHeuristic) -> Decision {
        let fresh = self.current_ranking(assignment);
        let ranking = fresh.as_ref().unwrap_or(&self.ranking);
        if let Some(&(lit, _)) = ranking.scores.iter().find(|(l, _)| !assignment.is_assigned(l.atom())) {
            return Decision {
                lit,
                flip_probability: self.noise,
            };
        }
        Decision {
            lit: fallback.pick(assignment).expect("no unassigned atom left"),
            flip_probability: 0.0,
        }
    }
}
