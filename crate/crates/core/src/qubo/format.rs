//! Plain-text QUBO format.
//!
//! ```text
//! # comment
//! qubo n=3
//! 0 0 -1.5
//! 0 2 0.25
//! ```
//!
//! Entries are 0-based with `i <= j`; off-diagonal values are mirrored.

use std::fmt::Write as _;

use super::{QuboMatrix, SquareMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn parse_qubo<T: Scalar>(text: &str) -> Result<QuboMatrix<T>> {
    let mut matrix: Option<SquareMatrix<T>> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| Error::Parse(format!("line {}: {msg}", lineno + 1));
        let Some(m) = matrix.as_mut() else {
            let n = line
                .strip_prefix("qubo")
                .map(str::trim)
                .and_then(|rest| rest.strip_prefix("n="))
                .and_then(|v| v.trim().parse::<usize>().ok())
                .filter(|&n| n >= 1)
                .ok_or_else(|| err("expected `qubo n=<n>` header"))?;
            matrix = Some(SquareMatrix::zeros(n));
            continue;
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(err("expected `i j value`"));
        }
        let i: usize = toks[0].parse().map_err(|_| err("bad row index"))?;
        let j: usize = toks[1].parse().map_err(|_| err("bad column index"))?;
        let v: f64 = toks[2].parse().map_err(|_| err("bad value"))?;
        if i > j {
            return Err(err("entries must satisfy i <= j"));
        }
        if j >= m.n() {
            return Err(err("index out of range"));
        }
        if !v.is_finite() {
            return Err(err("non-finite value"));
        }
        let v = T::from_f64_lossy(v);
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    let m = matrix.ok_or_else(|| Error::Parse("missing `qubo n=<n>` header".into()))?;
    QuboMatrix::dense(m)
}

/// Writes every nonzero upper-triangular entry.
pub fn write_qubo<T: Scalar>(q: &QuboMatrix<T>) -> String {
    let n = q.n();
    let mut s = format!("qubo n={n}\n");
    for i in 0..n {
        for j in i..n {
            let v = q.get(i, j);
            if v != T::zero() {
                let _ = writeln!(s, "{i} {j} {}", v.to_f64_lossy());
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_small() {
        let q: QuboMatrix<f64> = parse_qubo("# demo\nqubo n=2\n0 0 -1\n1 1 2 # trailing\n").unwrap();
        assert_eq!(q.get(0, 0), -1.0);
        assert_eq!(q.get(1, 1), 2.0);
        let q: QuboMatrix<f64> = parse_qubo("qubo n=3\n0 2 0.5\n").unwrap();
        assert_eq!(q.get(2, 0), 0.5);
    }

    #[test]
    fn round_trip() {
        let q: QuboMatrix<f64> =
            parse_qubo("qubo n=3\n0 0 0.1\n0 1 -0.30000000000000004\n2 2 7\n").unwrap();
        let back: QuboMatrix<f64> = parse_qubo(&write_qubo(&q)).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn malformed() {
        for bad in [
            "",
            "0 0 1\n",
            "qubo n=0\n",
            "qubo n=2\n1 0 1\n",
            "qubo n=2\n0 2 1\n",
            "qubo n=2\n0 1\n",
            "qubo n=2\n0 1 abc\n",
            "qubo n=2\n0 1 inf\n",
        ] {
            assert!(parse_qubo::<f64>(bad).is_err(), "{bad:?}");
        }
    }
}
