//! Persisted samples: `#` header lines, one model per line as
//! space-separated atom names, and a `COST`/`N`/`REASON` trailer.

use std::fmt::Write as _;

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleFile {
    pub theta: Vec<String>,
    pub seed: u64,
    pub psi: f64,
    pub queries: Vec<String>,
    pub models: Vec<Vec<String>>,
    pub cost: f64,
    pub reason: String,
}

impl SampleFile {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# theta {}", self.theta.join(" "));
        let _ = writeln!(out, "# seed {}", self.seed);
        let _ = writeln!(out, "# psi {}", self.psi);
        let _ = writeln!(out, "# query {}", self.queries.join(" "));
        for m in &self.models {
            let _ = writeln!(out, "{}", m.join(" "));
        }
        out.push_str(&trailer(self.cost, self.models.len(), &self.reason));
        out
    }

    pub fn parse(text: &str) -> Result<SampleFile> {
        let mut lines: Vec<&str> = text.lines().collect();
        let mut file = SampleFile::default();
        let mut tail = Vec::new();
        while tail.len() < 3 {
            match lines.last() {
                Some(l) if ["COST ", "N ", "REASON "].iter().any(|p| l.starts_with(p)) => {
                    tail.push(lines.pop().unwrap());
                }
                _ => break,
            }
        }
        let mut n = None;
        for l in tail {
            let (key, value) = l.split_once(' ').unwrap();
            match key {
                "COST" => file.cost = value.trim().parse().context("bad COST line")?,
                "N" => n = Some(value.trim().parse::<usize>().context("bad N line")?),
                _ => file.reason = value.trim().to_string(),
            }
        }
        for l in lines {
            if let Some(header) = l.strip_prefix('#') {
                let header = header.trim_start();
                let (key, value) = header.split_once(' ').unwrap_or((header, ""));
                let words = || value.split_whitespace().map(str::to_string).collect();
                match key {
                    "theta" => file.theta = words(),
                    "seed" => file.seed = value.trim().parse().context("bad seed header")?,
                    "psi" => file.psi = value.trim().parse().context("bad psi header")?,
                    "query" => file.queries = words(),
                    _ => {}
                }
            } else {
                file.models.push(l.split_whitespace().map(str::to_string).collect());
            }
        }
        if let Some(n) = n {
            if n != file.models.len() {
                bail!("trailer says {n} models, file has {}", file.models.len());
            }
        }
        Ok(file)
    }
}

pub fn trailer(cost: f64, n: usize, reason: &str) -> String {
    format!("COST {cost}\nN {n}\nREASON {reason}\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let f = SampleFile {
            theta: vec!["a".into(), "b".into()],
            seed: 7,
            psi: 0.001,
            queries: vec!["a".into()],
            models: vec![vec!["a".into()], vec![], vec!["b".into(), "c".into()]],
            cost: 0.0004,
            reason: "converged".into(),
        };
        assert_eq!(SampleFile::parse(&f.render()).unwrap(), f);
    }

    #[test]
    fn count_mismatch() {
        assert!(SampleFile::parse("# seed 1\na\nCOST 0\nN 2\nREASON converged\n").is_err());
    }
}
