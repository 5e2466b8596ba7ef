//! The line-based `.d2p` polynomial format and the graph edge-list format.
//!
//! ```text
//! # x1*x2 + 3 x1 - 1/2
//! n 2
//! Q 1 2 1
//! L 1 3
//! C -1/2
//! ```
//!
//! Indices are 1-based.  Repeated terms are summed.

use std::fmt::Write as _;

use rug::Rational;
use sha2::{Digest, Sha256};

use super::{Degree2Polynomial, Graph};
use crate::error::{Error, Result};
use crate::util::parse_rational;

fn fmt_rational(x: &Rational) -> String {
    if *x.denom() == 1 {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

fn parse_index(tok: &str, n: usize, line_no: usize) -> Result<usize> {
    let i: usize = tok
        .parse()
        .map_err(|_| Error::Parse(format!("line {line_no}: bad variable index '{tok}'")))?;
    if i == 0 || i > n {
        return Err(Error::Parse(format!(
            "line {line_no}: variable index {i} outside 1..={n}"
        )));
    }
    Ok(i - 1)
}

/// Parses a `.d2p` document.  The multilinear flag of the result is set
/// exactly when no `Q i i` line is present.
pub fn parse_d2p(text: &str) -> Result<Degree2Polynomial> {
    let mut n: Option<usize> = None;
    let mut quad: Vec<(usize, usize, Rational)> = Vec::new();
    let mut lin: Vec<(usize, Rational)> = Vec::new();
    let mut constant = Rational::new();
    let mut pending: Vec<(usize, Vec<String>)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks[0] {
            "n" => {
                if toks.len() != 2 {
                    return Err(Error::Parse(format!("line {line_no}: expected 'n <int>'")));
                }
                if n.is_some() {
                    return Err(Error::Parse(format!(
                        "line {line_no}: duplicate 'n' header"
                    )));
                }
                n = Some(toks[1].parse().map_err(|_| {
                    Error::Parse(format!("line {line_no}: bad variable count '{}'", toks[1]))
                })?);
            }
            "C" | "L" | "Q" => {
                pending.push((line_no, toks.iter().map(|s| s.to_string()).collect()))
            }
            other => {
                return Err(Error::Parse(format!(
                    "line {line_no}: unknown record '{other}'"
                )))
            }
        }
    }
    let n = n.ok_or_else(|| Error::Parse("missing 'n <int>' header".into()))?;
    for (line_no, toks) in pending {
        let value =
            |t: &str| parse_rational(t).map_err(|e| Error::Parse(format!("line {line_no}: {e}")));
        match toks[0].as_str() {
            "C" if toks.len() == 2 => constant += value(&toks[1])?,
            "L" if toks.len() == 3 => {
                lin.push((parse_index(&toks[1], n, line_no)?, value(&toks[2])?))
            }
            "Q" if toks.len() == 4 => {
                let i = parse_index(&toks[1], n, line_no)?;
                let j = parse_index(&toks[2], n, line_no)?;
                if i > j {
                    return Err(Error::Parse(format!(
                        "line {line_no}: Q record requires i <= j"
                    )));
                }
                quad.push((i, j, value(&toks[3])?));
            }
            tag => {
                return Err(Error::Parse(format!(
                    "line {line_no}: wrong number of fields for '{tag}'"
                )))
            }
        }
    }
    let multilinear = quad.iter().all(|(i, j, _)| i != j);
    let mut p = if multilinear {
        Degree2Polynomial::new_multilinear(n)
    } else {
        Degree2Polynomial::new(n)
    };
    for (i, j, c) in quad {
        p.add_quad(i, j, c)?;
    }
    for (i, c) in lin {
        p.add_lin(i, c)?;
    }
    p.add_constant(constant);
    Ok(p)
}

/// Serializes a polynomial in canonical `.d2p` form (ascending indices,
/// no zero entries, reduced fractions).
pub fn format_d2p(p: &Degree2Polynomial) -> String {
    let mut s = String::new();
    writeln!(s, "n {}", p.n()).unwrap();
    for (&(i, j), c) in p.quad_terms() {
        writeln!(s, "Q {} {} {}", i + 1, j + 1, fmt_rational(c)).unwrap();
    }
    for (&i, c) in p.lin_terms() {
        writeln!(s, "L {} {}", i + 1, fmt_rational(c)).unwrap();
    }
    if *p.constant_term() != 0 {
        writeln!(s, "C {}", fmt_rational(p.constant_term())).unwrap();
    }
    s
}

/// First 128 bits (hex) of the SHA-256 of the canonical `.d2p` text; equal
/// polynomials have equal digests.
pub fn poly_digest(p: &Degree2Polynomial) -> String {
    let hash = Sha256::digest(format_d2p(p).as_bytes());
    hash.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

/// Parses a graph given as one `u v` pair per line (1-based vertices,
/// `#` comments).  An optional `n <int>` line fixes the vertex count;
/// otherwise it is the largest vertex index seen.
pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut n: Option<usize> = None;
    let mut edges = Vec::new();
    let mut max_v = 0usize;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(Error::Parse(format!("line {line_no}: expected 'u v'")));
        }
        if toks[0] == "n" {
            n = Some(
                toks[1]
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {line_no}: bad vertex count")))?,
            );
            continue;
        }
        let parse_v = |t: &str| -> Result<usize> {
            let v: usize = t
                .parse()
                .map_err(|_| Error::Parse(format!("line {line_no}: bad vertex '{t}'")))?;
            if v == 0 {
                return Err(Error::Parse(format!(
                    "line {line_no}: vertices are 1-based"
                )));
            }
            Ok(v)
        };
        let (u, v) = (parse_v(toks[0])?, parse_v(toks[1])?);
        max_v = max_v.max(u).max(v);
        edges.push((u - 1, v - 1));
    }
    let n = n.unwrap_or(max_v);
    if max_v > n {
        return Err(Error::Parse(format!(
            "vertex {max_v} exceeds declared count {n}"
        )));
    }
    Graph::new(n, edges).map_err(|e| match e {
        Error::Precondition(m) => Error::Parse(m),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "# demo\nn 3\nQ 1 2 1\nQ 2 2 -3/4\nL 3 0.5\nC -2\n";
        let p = parse_d2p(text).unwrap();
        assert!(!p.multilinear_flag());
        assert_eq!(p.lin_coeff(2), Rational::from((1, 2)));
        let again = parse_d2p(&format_d2p(&p)).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_d2p("Q 1 2 1"), Err(Error::Parse(_))));
        assert!(matches!(parse_d2p("n 2\nQ 2 1 1"), Err(Error::Parse(_))));
        assert!(matches!(parse_d2p("n 2\nL 3 1"), Err(Error::Parse(_))));
        assert!(matches!(parse_d2p("n 2\nX 1"), Err(Error::Parse(_))));
        assert!(matches!(parse_d2p("n 2\nL 1 1/0"), Err(Error::Parse(_))));
    }

    #[test]
    fn edge_list() {
        let g = parse_edge_list("1 2\n2 3\n# c\n1 3\n").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges().len(), 3);
        assert!(parse_edge_list("1 1\n").is_err());
        assert_eq!(parse_edge_list("n 5\n1 2\n").unwrap().n(), 5);
    }
}
