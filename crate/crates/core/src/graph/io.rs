//! Text formats for the item graph, SPPMI matrix and Chebyshev cache.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Scalar;

use super::{Adjacency, SparseMatrix};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line,
        message: message.into(),
    }
}

/// Header `N E`, then one `i j` line per edge with `i < j`.
pub fn write_graph<T: Scalar>(path: impl AsRef<Path>, a: &Adjacency<T>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{} {}", a.dim(), a.n_edges)?;
    for (i, j) in a.edges() {
        writeln!(w, "{i} {j}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_graph<T: Scalar>(path: impl AsRef<Path>) -> Result<Adjacency<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (n, e) = match lines.next() {
        Some((_, h)) => parse_pair(h).ok_or_else(|| parse_err(path, 1, "bad header"))?,
        None => return Err(Error::EmptyInput(path.display().to_string())),
    };
    let mut edges = Vec::with_capacity(e);
    for (k, line) in lines {
        let (i, j) = parse_pair(line).ok_or_else(|| parse_err(path, k + 1, "expected `i j`"))?;
        if i >= j {
            return Err(parse_err(path, k + 1, "edges must satisfy i < j"));
        }
        edges.push((i, j));
    }
    if edges.len() != e {
        return Err(parse_err(path, 1, format!("header says {e} edges, found {}", edges.len())));
    }
    Adjacency::from_edges(n, &edges)
}

fn parse_pair(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_whitespace();
    let a = it.next()?.parse().ok()?;
    let b = it.next()?.parse().ok()?;
    it.next().is_none().then_some((a, b))
}

fn write_upper<T: Scalar>(w: &mut impl Write, m: &SparseMatrix<T>, strict: bool) -> Result<()> {
    for (i, j, v) in m.iter() {
        if i < j || (!strict && i == j) {
            writeln!(w, "{i} {j} {v}")?;
        }
    }
    Ok(())
}

/// `i j value` triplets with `i < j`, preceded by a `N` header.
pub fn write_sppmi<T: Scalar>(path: impl AsRef<Path>, s: &SparseMatrix<T>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{}", s.dim())?;
    write_upper(&mut w, s, true)?;
    w.flush()?;
    Ok(())
}

/// One Chebyshev term: header `N k`, then `i j value` with `i <= j`.
pub fn write_chebyshev_term<T: Scalar>(path: impl AsRef<Path>, k: usize, t: &SparseMatrix<T>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{} {k}", t.dim())?;
    write_upper(&mut w, t, false)?;
    w.flush()?;
    Ok(())
}

fn read_symmetric_triplets<T: Scalar>(path: &Path, body: std::iter::Enumerate<std::str::Lines<'_>>, n: usize) -> Result<SparseMatrix<T>> {
    let mut entries = Vec::new();
    for (k, line) in body {
        let mut it = line.split_whitespace();
        let parsed = (|| {
            let i: usize = it.next()?.parse().ok()?;
            let j: usize = it.next()?.parse().ok()?;
            let v: f64 = it.next()?.parse().ok()?;
            it.next().is_none().then_some((i, j, v))
        })();
        let (i, j, v) = parsed.ok_or_else(|| parse_err(path, k + 1, "expected `i j value`"))?;
        if i > j {
            return Err(parse_err(path, k + 1, "triplets must satisfy i <= j"));
        }
        entries.push((i, j, T::lit(v)));
        if i != j {
            entries.push((j, i, T::lit(v)));
        }
    }
    SparseMatrix::from_triplets(n, entries)
}

pub fn read_sppmi<T: Scalar>(path: impl AsRef<Path>) -> Result<SparseMatrix<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let n: usize = lines
        .next()
        .and_then(|(_, h)| h.trim().parse().ok())
        .ok_or_else(|| parse_err(path, 1, "bad header"))?;
    read_symmetric_triplets(path, lines, n)
}

/// Returns `(k, T_k)`.
pub fn read_chebyshev_term<T: Scalar>(path: impl AsRef<Path>) -> Result<(usize, SparseMatrix<T>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (n, k) = lines
        .next()
        .and_then(|(_, h)| parse_pair(h))
        .ok_or_else(|| parse_err(path, 1, "bad header"))?;
    Ok((k, read_symmetric_triplets(path, lines, n)?))
}
