//! Extended DIMACS-CNF: the usual header and clauses, plus `pats` lines
//! declaring parameter variables and `cost` lines whose expressions are
//! summed.

use super::expr::{parse_cost_expr, CostExpr, ExprError};
use super::program::Program;
use super::ParseError;
use crate::model::{Atom, Lit};

pub fn parse_cnf_with_cost(text: &str) -> Result<(Program, Option<CostExpr>), ParseError> {
    let mut header: Option<(u32, usize)> = None;
    let mut program = Program::with_variables(0);
    let mut current: Vec<Lit> = Vec::new();
    let mut pats: Vec<(usize, Vec<i64>)> = Vec::new();
    let mut costs: Vec<(usize, &str)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') && !line.starts_with("cost") || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("cost") {
            costs.push((line_no, rest.trim()));
            continue;
        }
        if let Some(rest) = line.strip_prefix("pats") {
            let vars = rest
                .split_whitespace()
                .map(|t| t.parse::<i64>().map_err(|_| ParseError::syntax(line_no, format!("invalid variable `{t}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            pats.push((line_no, vars));
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if header.is_some() {
                return Err(ParseError::syntax(line_no, "duplicate problem line"));
            }
            let fields: Vec<&str> = rest.split_whitespace().collect();
            match fields.as_slice() {
                ["cnf", v, c] => {
                    let v: u32 = v.parse().map_err(|_| ParseError::syntax(line_no, "invalid variable count"))?;
                    let c: usize = c.parse().map_err(|_| ParseError::syntax(line_no, "invalid clause count"))?;
                    program = Program::with_variables(v);
                    header = Some((v, c));
                }
                _ => return Err(ParseError::syntax(line_no, "expected `p cnf <vars> <clauses>`")),
            }
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(ParseError::syntax(line_no, "clause before problem line"));
        };
        for token in line.split_whitespace() {
            let v: i64 = token
                .parse()
                .map_err(|_| ParseError::syntax(line_no, format!("invalid literal `{token}`")))?;
            if v == 0 {
                program.clauses.push(std::mem::take(&mut current));
            } else {
                check_range(line_no, v, num_vars)?;
                current.push(Lit::from_dimacs(v));
            }
        }
    }
    let Some((num_vars, _)) = header else {
        return Err(ParseError::syntax(1, "missing problem line"));
    };
    if !current.is_empty() {
        program.clauses.push(current);
    }

    for (line_no, vars) in pats {
        for v in vars {
            if v <= 0 {
                return Err(ParseError::syntax(line_no, format!("parameter variable must be positive, got {v}")));
            }
            check_range(line_no, v, num_vars)?;
            program.add_param(Atom::new(v as u32));
        }
    }

    let mut total: Option<CostExpr> = None;
    for (line_no, text) in costs {
        let params = program.params.clone();
        let resolve = |s: &str| {
            s.parse::<u32>()
                .ok()
                .filter(|&v| v >= 1)
                .map(Atom::new)
                .filter(|a| params.contains(a))
        };
        let expr = parse_cost_expr(text, &resolve).map_err(|e| match e {
            ExprError::UnknownIdentifier(name) => match name.parse::<i64>() {
                Ok(v) if v < 1 || v > num_vars as i64 => ParseError::OutOfRange {
                    line: line_no,
                    var: v,
                    max: num_vars,
                },
                Ok(v) => ParseError::UndeclaredParameter {
                    line: line_no,
                    name: v.to_string(),
                },
                Err(_) => ParseError::Expr {
                    line: line_no,
                    source: ExprError::UnknownIdentifier(name),
                },
            },
            other => ParseError::Expr {
                line: line_no,
                source: other,
            },
        })?;
        total = Some(match total {
            None => expr,
            Some(acc) => CostExpr::add(acc, expr),
        });
    }

    program.validate().map_err(ParseError::Invalid)?;
    Ok((program, total))
}

fn check_range(line: usize, v: i64, num_vars: u32) -> Result<(), ParseError> {
    if v.unsigned_abs() > num_vars as u64 {
        return Err(ParseError::OutOfRange {
            line,
            var: v.abs(),
            max: num_vars,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::Mode;

    #[test]
    fn cnf_with_cost() {
        let (p, cost) = parse_cnf_with_cost("p cnf 2 1\n1 2 0\npats 1 2\ncost (0.2-f(1))^2").unwrap();
        assert_eq!(p.mode, Mode::Sat);
        assert_eq!(p.num_atoms(), 2);
        assert_eq!(p.clauses, vec![vec![Lit::from_dimacs(1), Lit::from_dimacs(2)]]);
        assert_eq!(p.params, vec![Atom::new(1), Atom::new(2)]);
        let cost = cost.unwrap();
        assert_eq!(cost.atoms(), vec![Atom::new(1)]);
    }

    #[test]
    fn plain_cnf() {
        let (p, cost) = parse_cnf_with_cost("c a comment\np cnf 1 1\n1 0\n").unwrap();
        assert_eq!(p.clauses.len(), 1);
        assert!(cost.is_none());
        assert!(p.params.is_empty());
    }

    #[test]
    fn cost_variable_out_of_range() {
        let err = parse_cnf_with_cost("p cnf 1 0\ncost f(3)").unwrap_err();
        assert_eq!(err, ParseError::OutOfRange { line: 2, var: 3, max: 1 });
    }

    #[test]
    fn cost_on_undeclared_parameter() {
        let err = parse_cnf_with_cost("p cnf 2 1\n1 2 0\npats 1\ncost f(2)").unwrap_err();
        assert!(matches!(err, ParseError::UndeclaredParameter { line: 4, .. }));
    }

    #[test]
    fn multiple_cost_lines_are_summed() {
        let (_, cost) = parse_cnf_with_cost("p cnf 2 1\n1 2 0\npats 1 2\ncost f(1)\ncost f(2)\r\n").unwrap();
        assert_eq!(
            cost.unwrap(),
            CostExpr::add(CostExpr::Freq(Atom::new(1)), CostExpr::Freq(Atom::new(2)))
        );
    }

    #[test]
    fn clauses_may_span_lines() {
        let (p, _) = parse_cnf_with_cost("p cnf 3 2\n1 -2\n 3 0 -1 0\n").unwrap();
        assert_eq!(p.clauses.len(), 2);
        assert_eq!(p.clauses[0].len(), 3);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        assert_eq!(
            parse_cnf_with_cost("p cnf 2 1\n1 x 0\n").unwrap_err(),
            ParseError::syntax(2, "invalid literal `x`")
        );
        assert!(matches!(parse_cnf_with_cost("1 2 0\n"), Err(ParseError::Syntax { line: 1, .. })));
        assert!(matches!(
            parse_cnf_with_cost("p cnf 2 1\n1 5 0\n"),
            Err(ParseError::OutOfRange { line: 2, var: 5, max: 2 })
        ));
    }
}
