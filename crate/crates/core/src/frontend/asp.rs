//! Ground normal programs in a small text format.
//!
//! ```text
//! % comment
//! a.                      fact
//! h :- b1, not c1.        rule
//! :- a, b.                integrity constraint
//! {a}.  {a; b}.           choice
//! 0.6 :: a.               weighted (uncertain) atom
//! 0.6 :: h :- b.          weighted rule
//! #query a.
//! #cost (0.4 - f(aux)/f(q))^2.
//! ```

use super::expr::{parse_cost_expr, CostExpr};
use super::program::{Mode, Program, Rule};
use super::ParseError;
use crate::model::Atom;

pub fn parse_ground_asp(text: &str) -> Result<(Program, Option<CostExpr>), ParseError> {
    let mut program = Program::new(Mode::Asp);
    let mut costs: Vec<(usize, String)> = Vec::new();

    for (line, stmt) in statements(text)? {
        let stmt = stmt.trim();
        if let Some(rest) = stmt.strip_prefix("#query") {
            for name in split_top_level(rest, &[',', ';']) {
                let name = atom_name(line, name)?;
                let atom = program.atom(&name);
                if !program.queries.contains(&atom) {
                    program.queries.push(atom);
                }
            }
        } else if let Some(rest) = stmt.strip_prefix("#cost") {
            costs.push((line, rest.trim().to_string()));
        } else if stmt.starts_with('#') {
            let directive: String = stmt.chars().take_while(|c| !c.is_whitespace()).collect();
            return Err(ParseError::syntax(line, format!("unknown directive `{directive}`")));
        } else if let Some(inner) = stmt.strip_prefix('{') {
            let inner = inner
                .strip_suffix('}')
                .ok_or_else(|| ParseError::syntax(line, "expected `}` closing choice"))?;
            for name in split_top_level(inner, &[';', ',']) {
                let name = atom_name(line, name)?;
                let atom = program.atom(&name);
                program.add_choice(atom);
            }
        } else if let Some((lhs, rhs)) = stmt.split_once("::") {
            let weight: f64 = lhs
                .trim()
                .parse()
                .map_err(|_| ParseError::syntax(line, format!("invalid weight `{}`", lhs.trim())))?;
            let (head, body) = split_rule(line, rhs)?;
            let Some(head) = head else {
                return Err(ParseError::syntax(line, "a weighted statement needs a head"));
            };
            let head = program.atom(&head);
            match body {
                None => program
                    .set_weight(head, weight)
                    .map_err(|source| ParseError::Program { line, source })?,
                Some(body) => {
                    let (pos, neg) = intern_body(&mut program, &body)?;
                    program
                        .add_weighted_rule(head, pos, neg, weight)
                        .map_err(|source| ParseError::Program { line, source })?;
                }
            }
        } else {
            let (head, body) = split_rule(line, stmt)?;
            let head = head.map(|h| program.atom(&h));
            let (pos, neg) = match &body {
                Some(body) => intern_body(&mut program, body)?,
                None => (vec![], vec![]),
            };
            if head.is_none() && body.is_none() {
                return Err(ParseError::syntax(line, "empty statement"));
            }
            program.rules.push(Rule::new(head, pos, neg));
        }
    }

    let mut total: Option<CostExpr> = None;
    for (line, text) in costs {
        let symbols = &program.symbols;
        let resolve = |s: &str| symbols.lookup(s).filter(|_| is_identifier_start(s));
        let expr = parse_cost_expr(&text, &resolve).map_err(|source| ParseError::Expr { line, source })?;
        for atom in expr.atoms() {
            program.add_param(atom);
        }
        total = Some(match total {
            None => expr,
            Some(acc) => CostExpr::add(acc, expr),
        });
    }

    program.validate().map_err(ParseError::Invalid)?;
    Ok((program, total))
}

fn is_identifier_start(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_lowercase())
}

/// Splits the input into `.`-terminated statements with their starting line.
/// A `.` between two digits is a decimal point.
fn statements(text: &str) -> Result<Vec<(usize, String)>, ParseError> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start_line = 1;
    let mut depth = 0i32;
    for (line, raw_line) in (1..).zip(text.split('\n')) {
        let content = raw_line.split('%').next().unwrap_or("").trim_end_matches('\r');
        let chars: Vec<char> = content.chars().collect();
        for (i, &c) in chars.iter().enumerate() {
            if current.trim().is_empty() && !c.is_whitespace() {
                start_line = line;
            }
            match c {
                '(' | '{' => depth += 1,
                ')' | '}' => depth -= 1,
                _ => {}
            }
            let decimal_point = c == '.'
                && i > 0
                && chars[i - 1].is_ascii_digit()
                && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
            if c == '.' && depth == 0 && !decimal_point {
                if current.trim().is_empty() {
                    return Err(ParseError::syntax(line, "empty statement"));
                }
                out.push((start_line, std::mem::take(&mut current)));
            } else {
                current.push(c);
            }
        }
        current.push(' ');
    }
    if !current.trim().is_empty() {
        return Err(ParseError::syntax(start_line, "statement not terminated by `.`"));
    }
    Ok(out)
}

/// Splits on any of `seps` outside parentheses; empty pieces are dropped.
fn split_top_level<'a>(s: &'a str, seps: &[char]) -> Vec<&'a str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if depth == 0 && seps.contains(&c) => {
                parts.push(&s[start..i]);
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts.into_iter().filter(|p| !p.trim().is_empty()).collect()
}

type Body = Vec<(bool, String)>;

fn split_rule(line: usize, stmt: &str) -> Result<(Option<String>, Option<Body>), ParseError> {
    let (head, body) = match stmt.split_once(":-") {
        Some((h, b)) => (h.trim(), Some(b)),
        None => (stmt.trim(), None),
    };
    let head = if head.is_empty() { None } else { Some(atom_name(line, head)?) };
    let body = match body {
        None => None,
        Some(b) => {
            let mut lits = Vec::new();
            for lit in split_top_level(b, &[',']) {
                let lit = lit.trim();
                match lit.strip_prefix("not").filter(|r| r.starts_with(char::is_whitespace)) {
                    Some(rest) => lits.push((false, atom_name(line, rest)?)),
                    None => lits.push((true, atom_name(line, lit)?)),
                }
            }
            if lits.is_empty() && head.is_some() {
                return Err(ParseError::syntax(line, "empty rule body"));
            }
            Some(lits)
        }
    };
    Ok((head, body))
}

fn intern_body(program: &mut Program, body: &Body) -> Result<(Vec<Atom>, Vec<Atom>), ParseError> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (positive, name) in body {
        let atom = program.atom(name);
        if *positive {
            pos.push(atom);
        } else {
            neg.push(atom);
        }
    }
    Ok((pos, neg))
}

/// Validates a ground atom and returns its whitespace-free canonical form.
fn atom_name(line: usize, text: &str) -> Result<String, ParseError> {
    let canonical: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if !is_term(&canonical, true) || canonical == "not" {
        return Err(ParseError::syntax(line, format!("invalid atom `{}`", text.trim())));
    }
    Ok(canonical)
}

fn is_term(s: &str, require_symbol: bool) -> bool {
    let (functor, args) = match s.find('(') {
        Some(i) => {
            let Some(inner) = s[i..].strip_prefix('(').and_then(|r| r.strip_suffix(')')) else {
                return false;
            };
            (&s[..i], Some(inner))
        }
        None => (s, None),
    };
    let symbol = functor.chars().next().is_some_and(|c| c.is_ascii_lowercase())
        && functor.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    let integer = !require_symbol
        && args.is_none()
        && functor.strip_prefix('-').unwrap_or(functor).chars().all(|c| c.is_ascii_digit())
        && !functor.strip_prefix('-').unwrap_or(functor).is_empty();
    if !(symbol || integer) {
        return false;
    }
    match args {
        None => true,
        Some(inner) => split_args(inner).iter().all(|p| !p.is_empty() && is_term(p, false)),
    }
}

/// Splits a term's argument list on top-level commas, keeping empty pieces.
fn split_args(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}
