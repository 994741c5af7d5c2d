//! Brute-force reference implementations for testing: truth-table and
//! reduct-based model enumeration, exact feasibility of weights, and exact
//! marginals of independent weighted atoms.
//!
//! Nothing here shares code with the compiler or the engine.

use thiserror::Error;

use crate::frontend::{Mode, Program};
use crate::model::{Atom, Model};

pub const MAX_ATOMS: usize = 24;
pub const MAX_WORLDS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{0} atoms exceed the oracle limit of {MAX_ATOMS}")]
    TooManyAtoms(usize),
    #[error("{0} possible worlds exceed the oracle limit of {MAX_WORLDS}")]
    TooManyWorlds(usize),
    #[error("weighted atoms do not induce a product distribution over the models (total mass {0})")]
    NotAProduct(f64),
}

fn holds(mask: u32, a: Atom) -> bool {
    mask >> a.slot() & 1 == 1
}

fn to_model(mask: u32, n: usize) -> Model {
    (0..n).filter(|&s| mask >> s & 1 == 1).map(Atom::from_slot).collect()
}

/// A rule of the program as plain data: head (if any), positive and
/// negative body.
struct Plain {
    head: Option<Atom>,
    pos: Vec<Atom>,
    neg: Vec<Atom>,
}

/// The rules defining stable models of `program` in ASP mode. A choice `{a}`
/// contributes `a.` to the reduct when `a` is in the candidate; a weighted
/// rule `h :- B` with auxiliary `x` means `h :- B, not x.` and
/// `x :- B, not h.`
fn plain_rules(program: &Program) -> Vec<Plain> {
    let mut out: Vec<Plain> = program
        .rules
        .iter()
        .map(|r| Plain {
            head: r.head,
            pos: r.pos.clone(),
            neg: r.neg.clone(),
        })
        .collect();
    for wr in &program.weighted_rules {
        let mut n1 = wr.neg.clone();
        n1.push(wr.aux);
        out.push(Plain {
            head: Some(wr.head),
            pos: wr.pos.clone(),
            neg: n1,
        });
        let mut n2 = wr.neg.clone();
        n2.push(wr.head);
        out.push(Plain {
            head: Some(wr.aux),
            pos: wr.pos.clone(),
            neg: n2,
        });
    }
    out
}

fn is_answer_set(program: &Program, rules: &[Plain], mask: u32) -> bool {
    // Integrity constraints.
    for r in rules.iter().filter(|r| r.head.is_none()) {
        if r.pos.iter().all(|&a| holds(mask, a)) && r.neg.iter().all(|&a| !holds(mask, a)) {
            return false;
        }
    }
    // Least model of the reduct by naive iteration to fixpoint.
    let mut least: u32 = 0;
    for &c in &program.choices {
        if holds(mask, c) {
            least |= 1 << c.slot();
        }
    }
    loop {
        let mut next = least;
        for r in rules {
            let Some(h) = r.head else { continue };
            if r.neg.iter().any(|&a| holds(mask, a)) {
                continue;
            }
            if r.pos.iter().all(|&a| holds(least, a)) {
                next |= 1 << h.slot();
            }
        }
        if next == least {
            break;
        }
        least = next;
    }
    least == mask
}

/// All models of the program: satisfying assignments in SAT mode, stable
/// models in ASP mode. Sorted.
pub fn enumerate_models(program: &Program) -> Result<Vec<Model>, OracleError> {
    let n = program.num_atoms();
    if n > MAX_ATOMS {
        return Err(OracleError::TooManyAtoms(n));
    }
    let mut out = Vec::new();
    match program.mode {
        Mode::Sat => {
            for mask in 0u32..1 << n {
                let sat = program
                    .clauses
                    .iter()
                    .all(|c| c.iter().any(|l| holds(mask, l.atom()) == l.is_positive()));
                if sat {
                    out.push(to_model(mask, n));
                }
            }
        }
        Mode::Asp => {
            let rules = plain_rules(program);
            for mask in 0u32..1 << n {
                if is_answer_set(program, &rules, mask) {
                    out.push(to_model(mask, n));
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Result of the weight-feasibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Probability per model, in the order given.
    pub distribution: Vec<f64>,
    /// `‖Aπ - φ‖²` at the returned distribution.
    pub residual: f64,
    /// The residual divided by the number of weights: the least reachable MSE.
    pub min_mse: f64,
}

pub const FEASIBILITY_ITERATIONS: usize = 100_000;
pub const FEASIBILITY_TOLERANCE: f64 = 1e-10;
/// Residuals up to this count as feasible.
pub const FEASIBLE_RESIDUAL: f64 = 1e-8;

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (i, &x) in u.iter().enumerate() {
        cumulative += x;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Minimizes `‖Aπ - φ‖²` over distributions `π` on `models`, where
/// `A[i][j] = 1` iff weighted atom `i` is true in model `j`. Accelerated
/// projected gradient with at most [`FEASIBILITY_ITERATIONS`] steps.
pub fn exact_feasibility(models: &[Model], weights: &[(Atom, f64)]) -> Result<Feasibility, OracleError> {
    let m = models.len();
    if m > MAX_WORLDS {
        return Err(OracleError::TooManyWorlds(m));
    }
    let k = weights.len();
    if m == 0 {
        let residual: f64 = weights.iter().map(|&(_, w)| w * w).sum();
        return Ok(Feasibility {
            feasible: false,
            distribution: Vec::new(),
            residual,
            min_mse: residual / k.max(1) as f64,
        });
    }
    let a: Vec<Vec<bool>> = weights.iter().map(|&(x, _)| models.iter().map(|mo| mo.contains(x)).collect()).collect();
    let phi: Vec<f64> = weights.iter().map(|&(_, w)| w).collect();
    let apply = |pi: &[f64]| -> Vec<f64> {
        a.iter()
            .zip(&phi)
            .map(|(row, &p)| row.iter().zip(pi).filter(|(&r, _)| r).map(|(_, &x)| x).sum::<f64>() - p)
            .collect()
    };
    let norm2 = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let frobenius: f64 = a.iter().flatten().filter(|&&x| x).count() as f64;
    let step = 1.0 / (2.0 * frobenius.max(1.0));

    let mut x = vec![1.0 / m as f64; m];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut residual = norm2(&apply(&x));
    for _ in 0..FEASIBILITY_ITERATIONS {
        if residual < FEASIBILITY_TOLERANCE {
            break;
        }
        let r = apply(&y);
        let grad: Vec<f64> = (0..m)
            .map(|j| 2.0 * a.iter().zip(&r).filter(|(row, _)| row[j]).map(|(_, &ri)| ri).sum::<f64>())
            .collect();
        let moved: Vec<f64> = y.iter().zip(&grad).map(|(yi, gi)| yi - step * gi).collect();
        let next = project_simplex(&moved);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        let change = next.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        y = next.iter().zip(&x).map(|(n, o)| n + beta * (n - o)).collect();
        x = next;
        t = t_next;
        residual = norm2(&apply(&x));
        if change < 1e-15 {
            break;
        }
    }
    Ok(Feasibility {
        feasible: residual <= FEASIBLE_RESIDUAL,
        distribution: x,
        residual,
        min_mse: residual / k.max(1) as f64,
    })
}

/// Exact marginals when the weighted atoms act as independent coin flips:
/// every model gets the product of `w` or `1 - w` over the weighted atoms,
/// and the total mass must be one.
pub fn product_marginals(program: &Program, queries: &[Atom]) -> Result<Vec<f64>, OracleError> {
    let models = enumerate_models(program)?;
    let weights = program.weighted_params();
    let mut mass = 0.0;
    let mut out = vec![0.0; queries.len()];
    for m in &models {
        let p: f64 = weights
            .iter()
            .map(|&(a, w)| if m.contains(a) { w } else { 1.0 - w })
            .product();
        mass += p;
        for (q, o) in queries.iter().zip(out.iter_mut()) {
            if m.contains(*q) {
                *o += p;
            }
        }
    }
    if (mass - 1.0).abs() > 1e-9 {
        return Err(OracleError::NotAProduct(mass));
    }
    Ok(out)
}
