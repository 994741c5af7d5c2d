//! Cost expressions over parameter-atom frequencies.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' '-'? INT)*
//! primary := NUMBER | 'f' '(' ATOM ')' | ('abs' | 'sqrt' | 'sgn') '(' sum ')' | '(' sum ')'
//! ```

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::Atom;

#[derive(Debug, Clone, PartialEq)]
pub enum CostExpr {
    Const(f64),
    /// Frequency of a parameter atom in the current sample.
    Freq(Atom),
    Add(Box<CostExpr>, Box<CostExpr>),
    Sub(Box<CostExpr>, Box<CostExpr>),
    Mul(Box<CostExpr>, Box<CostExpr>),
    Div(Box<CostExpr>, Box<CostExpr>),
    Pow(Box<CostExpr>, i32),
    Abs(Box<CostExpr>),
    Sqrt(Box<CostExpr>),
    /// Sign function; appears in derivatives of `abs`.
    Sign(Box<CostExpr>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExprError {
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("malformed expression at offset {offset}: {message}")]
    Malformed { offset: usize, message: String },
}

impl CostExpr {
    pub fn freq(atom: Atom) -> CostExpr {
        CostExpr::Freq(atom)
    }

    pub fn add(a: CostExpr, b: CostExpr) -> CostExpr {
        CostExpr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: CostExpr, b: CostExpr) -> CostExpr {
        CostExpr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: CostExpr, b: CostExpr) -> CostExpr {
        CostExpr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: CostExpr, b: CostExpr) -> CostExpr {
        CostExpr::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(a: CostExpr, k: i32) -> CostExpr {
        CostExpr::Pow(Box::new(a), k)
    }

    /// Atoms referenced by `f(..)` nodes, in first-occurrence order.
    pub fn atoms(&self) -> Vec<Atom> {
        fn walk(e: &CostExpr, out: &mut Vec<Atom>) {
            match e {
                CostExpr::Const(_) => {}
                CostExpr::Freq(a) => {
                    if !out.contains(a) {
                        out.push(*a);
                    }
                }
                CostExpr::Add(x, y) | CostExpr::Sub(x, y) | CostExpr::Mul(x, y) | CostExpr::Div(x, y) => {
                    walk(x, out);
                    walk(y, out);
                }
                CostExpr::Pow(x, _) | CostExpr::Abs(x) | CostExpr::Sqrt(x) | CostExpr::Sign(x) => walk(x, out),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Renders the expression in the input grammar, naming atoms with `name`.
    /// Binary nodes are fully parenthesized so that parsing the output gives
    /// back the same tree.
    pub fn render(&self, name: &dyn Fn(Atom) -> String) -> String {
        let mut out = String::new();
        self.render_into(&mut out, name);
        out
    }

    fn render_into(&self, out: &mut String, name: &dyn Fn(Atom) -> String) {
        let bin = |out: &mut String, x: &CostExpr, op: &str, y: &CostExpr| {
            out.push('(');
            x.render_into(out, name);
            let _ = write!(out, " {op} ");
            y.render_into(out, name);
            out.push(')');
        };
        match self {
            CostExpr::Const(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    let _ = write!(out, "(-{})", -v);
                } else {
                    let _ = write!(out, "{v}");
                }
            }
            CostExpr::Freq(a) => {
                let _ = write!(out, "f({})", name(*a));
            }
            CostExpr::Add(x, y) => bin(out, x, "+", y),
            CostExpr::Sub(x, y) => bin(out, x, "-", y),
            CostExpr::Mul(x, y) => bin(out, x, "*", y),
            CostExpr::Div(x, y) => bin(out, x, "/", y),
            CostExpr::Pow(x, k) => {
                x.render_into(out, name);
                let _ = write!(out, "^{k}");
            }
            CostExpr::Abs(x) => {
                out.push_str("abs(");
                x.render_into(out, name);
                out.push(')');
            }
            CostExpr::Sqrt(x) => {
                out.push_str("sqrt(");
                x.render_into(out, name);
                out.push(')');
            }
            CostExpr::Sign(x) => {
                out.push_str("sgn(");
                x.render_into(out, name);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for CostExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&|a: Atom| a.index().to_string()))
    }
}

/// Parses a cost expression. `resolve` maps the text inside `f(..)` to a
/// declared parameter atom; unresolvable names are reported as unknown
/// identifiers.
pub fn parse_cost_expr(text: &str, resolve: &dyn Fn(&str) -> Option<Atom>) -> Result<CostExpr, ExprError> {
    let mut p = ExprParser {
        src: text.as_bytes(),
        text,
        pos: 0,
        resolve,
    };
    let e = p.sum()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.malformed("unexpected trailing input"));
    }
    Ok(e)
}

struct ExprParser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    resolve: &'a dyn Fn(&str) -> Option<Atom>,
}

impl<'a> ExprParser<'a> {
    fn malformed(&self, message: &str) -> ExprError {
        ExprError::Malformed {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.malformed(&format!("expected `{}`", c as char)))
        }
    }

    fn sum(&mut self) -> Result<CostExpr, ExprError> {
        let mut lhs = self.product()?;
        loop {
            if self.eat(b'+') {
                lhs = CostExpr::add(lhs, self.product()?);
            } else if self.eat(b'-') {
                lhs = CostExpr::sub(lhs, self.product()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn product(&mut self) -> Result<CostExpr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = CostExpr::mul(lhs, self.unary()?);
            } else if self.eat(b'/') {
                lhs = CostExpr::div(lhs, self.unary()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<CostExpr, ExprError> {
        if self.eat(b'-') {
            // A negated literal is a negative constant; anything else is `0 - x`.
            if matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
                let v = self.number()?;
                return Ok(match self.power_suffix(CostExpr::Const(v))? {
                    CostExpr::Const(v) => CostExpr::Const(-v),
                    powered => CostExpr::sub(CostExpr::Const(0.0), powered),
                });
            }
            let inner = self.unary()?;
            return Ok(CostExpr::sub(CostExpr::Const(0.0), inner));
        }
        self.power()
    }

    fn power(&mut self) -> Result<CostExpr, ExprError> {
        let base = self.primary()?;
        self.power_suffix(base)
    }

    fn power_suffix(&mut self, mut base: CostExpr) -> Result<CostExpr, ExprError> {
        while self.eat(b'^') {
            let negative = self.eat(b'-');
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.malformed("exponent must be an integer literal"));
            }
            let k: i32 = self.text[start..self.pos]
                .parse()
                .map_err(|_| self.malformed("exponent out of range"))?;
            base = CostExpr::pow(base, if negative { -k } else { k });
        }
        Ok(base)
    }

    fn number(&mut self) -> Result<f64, ExprError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.src;
        while self.pos < bytes.len() && (bytes[self.pos].is_ascii_digit() || bytes[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < bytes.len() && (bytes[self.pos] == b'+' || bytes[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        self.text[start..self.pos].parse().map_err(|_| {
            self.pos = start;
            self.malformed("invalid number")
        })
    }

    fn identifier(&mut self) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        &self.text[start..self.pos]
    }

    /// Raw text up to the parenthesis closing the one just consumed.
    fn balanced_argument(&mut self) -> Result<&'a str, ExprError> {
        let start = self.pos;
        let mut depth = 1usize;
        while self.pos < self.src.len() {
            match self.src[self.pos] {
                b'(' => depth += 1,
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        let arg = &self.text[start..self.pos];
                        self.pos += 1;
                        return Ok(arg);
                    }
                }
                _ => {}
            }
            self.pos += 1;
        }
        Err(self.malformed("unbalanced parentheses"))
    }

    fn primary(&mut self) -> Result<CostExpr, ExprError> {
        match self.peek() {
            None => Err(self.malformed("unexpected end of expression")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(CostExpr::Const(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let ident_start = self.pos;
                let ident = self.identifier();
                if !self.eat(b'(') {
                    self.pos = ident_start;
                    return Err(ExprError::UnknownIdentifier(ident.to_string()));
                }
                match ident {
                    "f" => {
                        let arg: String = self.balanced_argument()?.chars().filter(|c| !c.is_whitespace()).collect();
                        (self.resolve)(&arg)
                            .map(CostExpr::Freq)
                            .ok_or(ExprError::UnknownIdentifier(arg))
                    }
                    "abs" | "sqrt" | "sgn" => {
                        let inner = Box::new(self.sum()?);
                        self.expect(b')')?;
                        Ok(match ident {
                            "abs" => CostExpr::Abs(inner),
                            "sqrt" => CostExpr::Sqrt(inner),
                            _ => CostExpr::Sign(inner),
                        })
                    }
                    other => Err(ExprError::UnknownIdentifier(other.to_string())),
                }
            }
            Some(_) => Err(self.malformed("unexpected character")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(s: &str) -> Option<Atom> {
        match s {
            "a" => Some(Atom::new(1)),
            "b" => Some(Atom::new(2)),
            "aux" => Some(Atom::new(3)),
            "q" => Some(Atom::new(4)),
            _ => None,
        }
    }

    fn show(a: Atom) -> String {
        ["a", "b", "aux", "q"][a.slot()].to_string()
    }

    fn parse(s: &str) -> Result<CostExpr, ExprError> {
        parse_cost_expr(s, &names)
    }

    use CostExpr::*;

    fn c(v: f64) -> CostExpr {
        Const(v)
    }

    fn f(i: u32) -> CostExpr {
        Freq(Atom::new(i))
    }

    #[test]
    fn mse_example() {
        let e = parse("((0.2 - f(a))^2 + (0.6 - f(b))^2)/2").unwrap();
        let expected = CostExpr::div(
            CostExpr::add(
                CostExpr::pow(CostExpr::sub(c(0.2), f(1)), 2),
                CostExpr::pow(CostExpr::sub(c(0.6), f(2)), 2),
            ),
            c(2.0),
        );
        assert_eq!(e, expected);
        assert_eq!(e.atoms(), vec![Atom::new(1), Atom::new(2)]);
    }

    #[test]
    fn conditional_example() {
        let e = parse("(0.4 - f(aux)/f(q))^2").unwrap();
        let expected = CostExpr::pow(CostExpr::sub(c(0.4), CostExpr::div(f(3), f(4))), 2);
        assert_eq!(e, expected);
    }

    #[test]
    fn constant() {
        assert_eq!(parse("0.5").unwrap(), c(0.5));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(
            parse("1 - 2 - 3").unwrap(),
            CostExpr::sub(CostExpr::sub(c(1.0), c(2.0)), c(3.0))
        );
        assert_eq!(
            parse("1 + 2 * f(a)^2").unwrap(),
            CostExpr::add(c(1.0), CostExpr::mul(c(2.0), CostExpr::pow(f(1), 2)))
        );
        assert_eq!(parse("8 / 4 / 2").unwrap(), CostExpr::div(CostExpr::div(c(8.0), c(4.0)), c(2.0)));
        assert_eq!(parse("-f(a)^2").unwrap(), CostExpr::sub(c(0.0), CostExpr::pow(f(1), 2)));
        assert_eq!(parse("-0.5").unwrap(), c(-0.5));
        assert_eq!(parse("f(a)^-1").unwrap(), CostExpr::pow(f(1), -1));
    }

    #[test]
    fn errors() {
        assert_eq!(parse("f(zzz)"), Err(ExprError::UnknownIdentifier("zzz".into())));
        assert_eq!(parse("g(a)"), Err(ExprError::UnknownIdentifier("g".into())));
        assert!(matches!(parse("(1 + 2"), Err(ExprError::Malformed { .. })));
        assert!(matches!(parse("1 +"), Err(ExprError::Malformed { .. })));
        assert!(matches!(parse("f(a)^0.5"), Err(ExprError::Malformed { .. })));
        assert!(matches!(parse("1 2"), Err(ExprError::Malformed { .. })));
    }

    fn arb_expr() -> impl Strategy<Value = CostExpr> {
        let leaf = prop_oneof![
            (-10.0f64..10.0).prop_map(Const),
            (1u32..=4).prop_map(|i| Freq(Atom::new(i))),
        ];
        leaf.prop_recursive(5, 40, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| CostExpr::add(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| CostExpr::sub(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| CostExpr::mul(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| CostExpr::div(a, b)),
                (inner.clone(), -3i32..4).prop_map(|(a, k)| CostExpr::pow(a, k)),
                inner.clone().prop_map(|a| Abs(Box::new(a))),
                inner.clone().prop_map(|a| Sqrt(Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let text = e.render(&show);
            let back = parse(&text).unwrap();
            prop_assert_eq!(back, e);
        }
    }
}
