//! Input formats: extended DIMACS-CNF, ground ASP text, and cost expressions.

mod asp;
mod dimacs;
mod expr;
mod program;

pub use asp::parse_ground_asp;
pub use dimacs::parse_cnf_with_cost;
pub use expr::{parse_cost_expr, CostExpr, ExprError};
pub use program::{Mode, Program, ProgramError, Rule, SymbolTable, WeightedRule};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: variable {var} out of range (1..={max})")]
    OutOfRange { line: usize, var: i64, max: u32 },
    #[error("line {line}: `{name}` is not a declared parameter")]
    UndeclaredParameter { line: usize, name: String },
    #[error("line {line}: {source}")]
    Expr { line: usize, source: ExprError },
    #[error("line {line}: {source}")]
    Program { line: usize, source: ProgramError },
    #[error(transparent)]
    Invalid(ProgramError),
}

impl ParseError {
    pub(crate) fn syntax(line: usize, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line,
            message: message.into(),
        }
    }
}

/// Input format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Cnf,
    Lp,
}

impl Format {
    /// Guesses the format: DIMACS inputs have a `p cnf` problem line before
    /// anything else that is not a comment.
    pub fn detect(text: &str) -> Format {
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('%') || (line.starts_with('c') && !line.starts_with("cost")) {
                continue;
            }
            let mut words = line.split_whitespace();
            return if words.next() == Some("p") && words.next() == Some("cnf") {
                Format::Cnf
            } else {
                Format::Lp
            };
        }
        Format::Lp
    }
}

pub fn parse(text: &str, format: Format) -> Result<(Program, Option<CostExpr>), ParseError> {
    match format {
        Format::Cnf => parse_cnf_with_cost(text),
        Format::Lp => parse_ground_asp(text),
    }
}
