//! Line-oriented text format for box-constrained quadratic programs.
//!
//! ```text
//! qp 1
//! n 2
//! Q 3
//! 0 0 2.0
//! 0 1 0.5
//! 1 1 1.0
//! c -1.0 0.0
//! l 0 -inf
//! u 10 inf
//! ```
//!
//! Tokens are whitespace-separated; `#` starts a comment. `Q` entries use
//! 0-based indices with `i <= j` and are mirrored below the diagonal.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{BoxBounds, Objective, ProblemInstance};

/// `f(x) = 1/2 x^T Q x + c^T x` with exact gradient and Hessian products.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl Objective for QuadraticModel {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x + &self.c
    }

    fn hessvec(&self, _x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        Some(&self.q * v)
    }

    fn has_exact_hessvec(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpData {
    pub n: usize,
    /// Upper-triangle entries `(i, j, value)` with `i <= j`.
    pub q_upper: Vec<(usize, usize, f64)>,
    pub c: DVector<f64>,
    pub bounds: BoxBounds,
}

impl QpData {
    pub fn q_dense(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.q_upper {
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
        q
    }

    /// Upper-triangle triplets of a symmetric matrix, skipping exact zeros.
    pub fn triplets_from_dense(q: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..q.nrows() {
            for j in i..q.ncols() {
                if q[(i, j)] != 0.0 {
                    out.push((i, j, q[(i, j)]));
                }
            }
        }
        out
    }

    pub fn model(&self) -> QuadraticModel {
        QuadraticModel {
            q: self.q_dense(),
            c: self.c.clone(),
        }
    }

    pub fn to_instance(&self, name: impl Into<String>) -> Result<ProblemInstance> {
        ProblemInstance::new(name, Arc::new(self.model()), self.bounds.clone())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "qp 1");
        let _ = writeln!(s, "n {}", self.n);
        let _ = writeln!(s, "Q {}", self.q_upper.len());
        for &(i, j, v) in &self.q_upper {
            let _ = writeln!(s, "{i} {j} {v:?}");
        }
        let row = |tag: &str, v: &DVector<f64>| {
            let mut line = tag.to_string();
            for x in v.iter() {
                let _ = write!(line, " {x:?}");
            }
            line
        };
        let _ = writeln!(s, "{}", row("c", &self.c));
        let _ = writeln!(s, "{}", row("l", self.bounds.lower()));
        let _ = writeln!(s, "{}", row("u", self.bounds.upper()));
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, raw)| (i + 1, raw.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("unexpected end of input, expected {what}")))
        };

        let (ln, header) = next("header")?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        if tokens != ["qp", "1"] {
            return Err(Error::parse(ln, format!("expected header 'qp 1', found '{header}'")));
        }

        let (ln, line) = next("dimension")?;
        let n = match tagged(line, "n") {
            Some([tok]) => tok
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| Error::parse(ln, format!("invalid dimension '{tok}'")))?,
            _ => return Err(Error::parse(ln, "expected 'n <int>'")),
        };

        let (ln, line) = next("Q section")?;
        let nnz = match tagged(line, "Q") {
            Some([tok]) => tok
                .parse::<usize>()
                .map_err(|_| Error::parse(ln, format!("invalid entry count '{tok}'")))?,
            _ => return Err(Error::parse(ln, "expected 'Q <nnz>'")),
        };
        let mut q_upper = Vec::with_capacity(nnz);
        let mut seen = HashSet::new();
        for _ in 0..nnz {
            let (ln, line) = next("Q entry")?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(Error::parse(ln, "expected '<i> <j> <value>'"));
            }
            let index = |t: &str| {
                t.parse::<usize>()
                    .map_err(|_| Error::parse(ln, format!("invalid index '{t}'")))
            };
            let (i, j) = (index(toks[0])?, index(toks[1])?);
            if i >= n || j >= n {
                return Err(Error::parse(ln, format!("index ({i}, {j}) out of range for n = {n}")));
            }
            if i > j {
                return Err(Error::parse(ln, format!("entry ({i}, {j}) is below the diagonal")));
            }
            let v = finite(toks[2], ln)?;
            if !seen.insert((i, j)) {
                return Err(Error::parse(ln, format!("duplicate entry ({i}, {j})")));
            }
            q_upper.push((i, j, v));
        }

        let mut vector = |tag: &str, allow_inf: bool| -> Result<(usize, DVector<f64>)> {
            let (ln, line) = next(tag)?;
            let toks = tagged_any(line, tag)
                .ok_or_else(|| Error::parse(ln, format!("expected '{tag} <{n} reals>'")))?;
            if toks.len() != n {
                return Err(Error::parse(
                    ln,
                    format!("'{tag}' needs {n} values, found {}", toks.len()),
                ));
            }
            let vals = toks
                .iter()
                .map(|t| if allow_inf { bound_value(t, ln) } else { finite(t, ln) })
                .collect::<Result<Vec<_>>>()?;
            Ok((ln, DVector::from_vec(vals)))
        };
        let (_, c) = vector("c", false)?;
        let (_, lower) = vector("l", true)?;
        let (ln_u, upper) = vector("u", true)?;
        if lower.iter().any(|&v| v == f64::INFINITY) || upper.iter().any(|&v| v == f64::NEG_INFINITY) {
            return Err(Error::parse(ln_u, "lower bounds cannot be +inf nor upper bounds -inf"));
        }
        let bounds = BoxBounds::new(lower, upper).map_err(|e| Error::parse(ln_u, e.to_string()))?;

        if let Some((ln, _)) = lines.next() {
            return Err(Error::parse(ln, "trailing content after 'u' line"));
        }

        Ok(Self {
            n,
            q_upper,
            c,
            bounds,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn tagged<'a, const N: usize>(line: &'a str, tag: &str) -> Option<[&'a str; N]> {
    let toks = tagged_any(line, tag)?;
    toks.try_into().ok()
}

fn tagged_any<'a>(line: &'a str, tag: &str) -> Option<Vec<&'a str>> {
    let mut it = line.split_whitespace();
    if it.next()? != tag {
        return None;
    }
    Some(it.collect())
}

fn finite(tok: &str, line: usize) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::parse(line, format!("expected a finite number, found '{tok}'"))),
    }
}

fn bound_value(tok: &str, line: usize) -> Result<f64> {
    match tok {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => finite(tok, line),
    }
}

/// Reads a QP file into a problem named after the file stem.
pub fn load_qp(path: &Path) -> Result<ProblemInstance> {
    let data = QpData::read(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "qp".into());
    data.to_instance(name)
}
