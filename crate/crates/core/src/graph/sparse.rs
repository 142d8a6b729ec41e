use crate::error::{Error, Result};
use crate::Scalar;

/// Square sparse matrix in compressed sparse row form.
///
/// Column indices are strictly increasing within each row, so there are no
/// duplicate `(row, col)` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            cols: (0..dim).collect(),
            vals: vec![T::one(); dim],
        }
    }

    /// Builds a matrix from `(row, col, value)` entries in any order.
    pub fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, T)>) -> Result<Self> {
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= dim || c >= dim) {
            return Err(Error::IndexOutOfRange {
                index: r.max(c),
                len: dim,
            });
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Contract(format!(
                "duplicate entry ({}, {})",
                w[0].0, w[0].1
            )));
        }
        let mut row_ptr = vec![0; dim + 1];
        for &(r, _, _) in &entries {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let (cols, vals) = entries.into_iter().map(|(_, c, v)| (c, v)).unzip();
        Ok(Self {
            dim,
            row_ptr,
            cols,
            vals,
        })
    }

    /// Builds from a row-major dense array, keeping entries with `|v| > drop_below`.
    pub fn from_dense(dim: usize, dense: &[T], drop_below: T) -> Self {
        assert_eq!(dense.len(), dim * dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..dim {
            for c in 0..dim {
                let v = dense[r * dim + c];
                if v.abs() > drop_below {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    /// All stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim * self.dim];
        for (r, c, v) in self.iter() {
            out[r * self.dim + c] = v;
        }
        out
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.iter().all(|(r, c, v)| (self.get(c, r) - v).abs() <= tol)
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn scale(&self, alpha: T) -> Self {
        Self {
            vals: self.vals.iter().map(|&v| v * alpha).collect(),
            ..self.clone()
        }
    }

    /// `alpha * self + beta * other`, dropping entries with `|v| < prune`.
    pub fn linear_combination(&self, alpha: T, other: &Self, beta: T, prune: T) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut row_ptr = Vec::with_capacity(self.dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..self.dim {
            let mut a = self.row(r).peekable();
            let mut b = other.row(r).peekable();
            loop {
                let (c, v) = match (a.peek().copied(), b.peek().copied()) {
                    (None, None) => break,
                    (Some((ca, va)), Some((cb, _))) if ca < cb => {
                        a.next();
                        (ca, alpha * va)
                    }
                    (Some((ca, va)), Some((cb, vb))) if ca == cb => {
                        a.next();
                        b.next();
                        (ca, alpha * va + beta * vb)
                    }
                    (_, Some((cb, vb))) => {
                        b.next();
                        (cb, beta * vb)
                    }
                    (Some((ca, va)), None) => {
                        a.next();
                        (ca, alpha * va)
                    }
                };
                if v.abs() >= prune && v != T::zero() {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim: self.dim,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Sparse product `self * other` (row-wise Gustavson), pruning `|v| < prune`.
    pub fn matmul(&self, other: &Self, prune: T) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut acc = vec![T::zero(); n];
        let mut touched = vec![false; n];
        let mut pattern = Vec::new();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for r in 0..n {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        pattern.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            pattern.sort_unstable();
            for &c in &pattern {
                let v = acc[c];
                if v.abs() >= prune && v != T::zero() {
                    cols.push(c);
                    vals.push(v);
                }
                acc[c] = T::zero();
                touched[c] = false;
            }
            pattern.clear();
            row_ptr.push(cols.len());
        }
        Self {
            dim: n,
            row_ptr,
            cols,
            vals,
        }
    }

    /// `self * x` for a row-major `dim x cols` dense block.
    pub fn mul_dense(&self, x: &[T], ncols: usize) -> Vec<T> {
        debug_assert_eq!(x.len(), self.dim * ncols);
        let mut out = vec![T::zero(); self.dim * ncols];
        for r in 0..self.dim {
            let dst = &mut out[r * ncols..(r + 1) * ncols];
            for (c, v) in self.row(r) {
                for (d, &s) in dst.iter_mut().zip(&x[c * ncols..(c + 1) * ncols]) {
                    *d += v * s;
                }
            }
        }
        out
    }

    /// `selfᵀ * g` for a row-major `dim x cols` dense block.
    pub fn transpose_mul_dense(&self, g: &[T], ncols: usize) -> Vec<T> {
        debug_assert_eq!(g.len(), self.dim * ncols);
        let mut out = vec![T::zero(); self.dim * ncols];
        for r in 0..self.dim {
            let src = &g[r * ncols..(r + 1) * ncols];
            for (c, v) in self.row(r) {
                for (d, &s) in out[c * ncols..(c + 1) * ncols].iter_mut().zip(src) {
                    *d += v * s;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        self.mul_dense(x, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(dim: usize, e: &[(usize, usize, f64)]) -> SparseMatrix<f64> {
        SparseMatrix::from_triplets(dim, e.to_vec()).unwrap()
    }

    #[test]
    fn triplets_reject_duplicates_and_out_of_range() {
        assert!(SparseMatrix::from_triplets(2, vec![(0, 1, 1.0), (0, 1, 2.0)]).is_err());
        assert!(SparseMatrix::<f64>::from_triplets(2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn get_and_dense_agree() {
        let a = m(3, &[(2, 0, 5.0), (0, 1, 1.0), (1, 1, -2.0)]);
        assert_eq!(a.get(2, 0), 5.0);
        assert_eq!(a.get(0, 0), 0.0);
        assert_eq!(a.to_dense(), vec![0.0, 1.0, 0.0, 0.0, -2.0, 0.0, 5.0, 0.0, 0.0]);
        assert!(!a.is_symmetric(0.0));
    }

    #[test]
    fn products_match_dense() {
        let a = m(3, &[(0, 1, 1.0), (1, 0, 2.0), (1, 2, 3.0), (2, 2, -1.0)]);
        let b = m(3, &[(0, 0, 1.0), (1, 2, 4.0), (2, 1, 0.5)]);
        let da = a.to_dense();
        let db = b.to_dense();
        let mut want = vec![0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    want[i * 3 + j] += da[i * 3 + k] * db[k * 3 + j];
                }
            }
        }
        assert_eq!(a.matmul(&b, 0.0).to_dense(), want);

        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(a.mul_dense(&x, 2), vec![3.0, 4.0, 17.0, 22.0, -5.0, -6.0]);
        // aᵀ x
        assert_eq!(a.transpose_mul_dense(&x, 2), vec![6.0, 8.0, 1.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn linear_combination_prunes_cancellation() {
        let a = m(2, &[(0, 0, 1.0), (0, 1, 2.0)]);
        let b = m(2, &[(0, 1, 1.0), (1, 1, 3.0)]);
        let c = a.linear_combination(1.0, &b, -2.0, 1e-12);
        assert_eq!(c.nnz(), 2);
        assert_eq!(c.get(0, 0), 1.0);
        assert_eq!(c.get(1, 1), -6.0);
    }
}
