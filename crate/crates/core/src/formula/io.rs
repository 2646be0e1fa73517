//! Text format: a `p 2sat <n> <m>` header, then one clause per line as two
//! signed variable indices (`-3 7` is `¬x3 ∨ x7`).

use std::fmt::Write as _;
use std::io::BufRead;

use super::{Clause, Formula, Literal};
use crate::error::{Error, Result};
use crate::sign::Sign;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_literal(tok: &str, line: usize) -> Result<Literal> {
    let v: i64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("bad literal `{tok}`")))?;
    if v == 0 || v.unsigned_abs() > u32::MAX as u64 {
        return Err(parse_err(line, format!("bad literal `{tok}`")));
    }
    Ok(Literal::new(
        v.unsigned_abs() as u32,
        Sign::from_bool(v > 0),
    ))
}

fn signed(l: Literal) -> i64 {
    l.sign.as_i64() * l.var as i64
}

impl Formula {
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(16 + 12 * self.clauses.len());
        writeln!(s, "p 2sat {} {}", self.n, self.clauses.len()).unwrap();
        for c in &self.clauses {
            writeln!(s, "{} {}", signed(c.first), signed(c.second)).unwrap();
        }
        s
    }

    /// Parses the text format. Blank lines and lines starting with `c` are
    /// skipped.
    pub fn from_reader(reader: impl BufRead) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = k + 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('c') {
                continue;
            }
            let toks: Vec<&str> = t.split_whitespace().collect();
            match header {
                None => {
                    if toks.len() != 4 || toks[0] != "p" || toks[1] != "2sat" {
                        return Err(parse_err(lineno, "expected `p 2sat <n> <m>`"));
                    }
                    let n = toks[2]
                        .parse()
                        .map_err(|_| parse_err(lineno, "bad variable count"))?;
                    let m = toks[3]
                        .parse()
                        .map_err(|_| parse_err(lineno, "bad clause count"))?;
                    header = Some((n, m));
                }
                Some(_) => {
                    if toks.len() != 2 {
                        return Err(parse_err(lineno, "expected two literals"));
                    }
                    let a = parse_literal(toks[0], lineno)?;
                    let b = parse_literal(toks[1], lineno)?;
                    clauses.push(Clause::new(a, b));
                }
            }
        }
        let (n, m) = header.ok_or_else(|| parse_err(0, "missing header"))?;
        if clauses.len() != m {
            return Err(parse_err(
                0,
                format!("header announces {m} clauses, found {}", clauses.len()),
            ));
        }
        Formula::new(n, clauses)
    }
}

impl std::str::FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Formula::from_reader(s.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let f = Formula::generate(30, 1.2, 9).unwrap();
        let text = f.to_text();
        assert!(text.starts_with(&format!("p 2sat 30 {}\n", f.num_clauses())));
        let g: Formula = text.parse().unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn parses_signed_literals() {
        let f: Formula = "p 2sat 7 1\n-3 7\n".parse().unwrap();
        assert_eq!(
            f.clauses()[0],
            Clause::new(Literal::neg(3), Literal::pos(7))
        );
        assert_eq!(f.to_text(), "p 2sat 7 1\n-3 7\n");
    }

    #[test]
    fn rejects_malformed_input() {
        assert!("2 3\n".parse::<Formula>().is_err());
        assert!("p 2sat 3 2\n1 2\n".parse::<Formula>().is_err());
        assert!("p 2sat 3 1\n1 0\n".parse::<Formula>().is_err());
        assert!("p 2sat 3 1\n1 4\n".parse::<Formula>().is_err());
        assert!("p 2sat 3 1\n1 x\n".parse::<Formula>().is_err());
    }
}
