//! Reverse-mode differentiation over dense tensors.
//!
//! A [`Tape`] records every operation of one forward pass. Calling
//! [`Tape::backward`] walks the record in reverse and returns the gradient of
//! a scalar output with respect to every node; [`Gradients::accumulate_into`]
//! then adds the parameter gradients to a [`ParamStore`].

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::SparseMatrix;
use crate::Scalar;

use super::dense::{matmul, matmul_a_bt, matmul_at_b, sigmoid, softplus};
use super::{DenseTensor, ParamId, ParamStore};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<'a, T> {
    Constant,
    Param(ParamId),
    Spmm(&'a SparseMatrix<T>, Var),
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, T),
    Sigmoid(Var),
    Tanh(Var),
    Gather(Var, Vec<usize>),
    Sum(Var),
    SumSquares(Var),
    PairwiseBpr(Var, Vec<Triplet>),
    LinkBce(Var, Vec<(usize, usize, T)>),
    Factorization(Var, Var, Vec<(usize, usize, T)>),
}

/// `(row, positive column, negative column)` into a score matrix.
pub type Triplet = (usize, usize, usize);

struct Node<'a, T> {
    value: DenseTensor<T>,
    op: Op<'a, T>,
}

pub struct Tape<'a, T> {
    nodes: Vec<Node<'a, T>>,
}

impl<T: Scalar> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch {
        op,
        detail: format!("{a:?} vs {b:?}"),
    }
}

impl<'a, T: Scalar> Tape<'a, T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, name: &'static str, value: DenseTensor<T>, op: Op<'a, T>) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name.into()));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &DenseTensor<T> {
        &self.nodes[v.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> T {
        self.value(v).item()
    }

    pub fn constant(&mut self, value: DenseTensor<T>) -> Result<Var> {
        self.push("constant", value, Op::Constant)
    }

    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Result<Var> {
        self.push("param", store.value(id).clone(), Op::Param(id))
    }

    /// Sparse-dense product `S · X`.
    pub fn spmm(&mut self, s: &'a SparseMatrix<T>, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if s.dim() != xv.rows() {
            return Err(mismatch("spmm", &[s.dim(), s.dim()], xv.shape()));
        }
        let cols = xv.cols();
        let out = DenseTensor::matrix(s.dim(), cols, s.mul_dense(xv.data(), cols));
        self.push("spmm", out, Op::Spmm(s, x))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.rows() {
            return Err(mismatch("matmul", av.shape(), bv.shape()));
        }
        let out = matmul(av, bv);
        self.push("matmul", out, Op::MatMul(a, b))
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.cols() {
            return Err(mismatch("matmul_bt", av.shape(), bv.shape()));
        }
        let out = matmul_a_bt(av, bv);
        self.push("matmul_bt", out, Op::MatMulBt(a, b))
    }

    /// Exact-shape operands, or `b` a single row broadcast over `a`'s rows.
    fn binary(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<DenseTensor<T>> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.same_shape(bv) {
            return Ok(av.zip_map(bv, f));
        }
        if bv.rows() == 1 && bv.cols() == av.cols() {
            let c = av.cols();
            let mut out = av.clone();
            for (k, x) in out.data_mut().iter_mut().enumerate() {
                *x = f(*x, bv.data()[k % c]);
            }
            return Ok(out);
        }
        Err(mismatch(name, av.shape(), bv.shape()))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("add", a, b, |x, y| x + y)?;
        self.push("add", out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("sub", a, b, |x, y| x - y)?;
        self.push("sub", out, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary("mul", a, b, |x, y| x * y)?;
        self.push("mul", out, Op::Mul(a, b))
    }

    /// `alpha · a + beta`.
    pub fn affine(&mut self, a: Var, alpha: T, beta: T) -> Result<Var> {
        let out = self.value(a).map(|x| alpha * x + beta);
        self.push("affine", out, Op::Affine(a, alpha))
    }

    pub fn scale(&mut self, a: Var, alpha: T) -> Result<Var> {
        self.affine(a, alpha, T::zero())
    }

    /// `1 − a`.
    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        self.affine(a, -T::one(), T::one())
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(T::tanh);
        self.push("tanh", out, Op::Tanh(a))
    }

    /// Row lookup; the backward pass scatter-adds into the selected rows.
    pub fn gather(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let out = self.value(a).gather_rows(indices)?;
        self.push("gather", out, Op::Gather(a, indices.to_vec()))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = DenseTensor::scalar(self.value(a).sum());
        self.push("sum", out, Op::Sum(a))
    }

    pub fn sum_squares(&mut self, a: Var) -> Result<Var> {
        let out = DenseTensor::scalar(self.value(a).sq_norm());
        self.push("sum_squares", out, Op::SumSquares(a))
    }

    /// Inverted dropout: survivors are scaled by `1 / (1 − rate)`.
    /// Identity when `training` is false or `rate` is zero.
    pub fn dropout(&mut self, a: Var, rate: f64, training: bool, rng: &mut impl Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate {rate} not in [0, 1)")));
        }
        if !training || rate == 0.0 {
            return Ok(a);
        }
        let shape = self.value(a).shape().to_vec();
        let mask = dropout_mask::<T>(&shape, rate, rng);
        let m = self.constant(mask)?;
        self.mul(a, m)
    }

    /// `Σ −ln σ(S[r, p] − S[r, q])` over the given triplets of a score matrix.
    pub fn pairwise_bpr(&mut self, scores: Var, triplets: Vec<Triplet>) -> Result<Var> {
        let s = self.value(scores);
        let (rows, cols) = (s.rows(), s.cols());
        if let Some(&(r, p, q)) = triplets.iter().find(|&&(r, p, q)| r >= rows || p >= cols || q >= cols) {
            return Err(Error::ShapeMismatch {
                op: "pairwise_bpr",
                detail: format!("triplet ({r}, {p}, {q}) outside {rows}×{cols}"),
            });
        }
        let loss: T = triplets
            .iter()
            .map(|&(r, p, q)| softplus(-(s.get(r, p) - s.get(r, q))))
            .sum();
        self.push("pairwise_bpr", DenseTensor::scalar(loss), Op::PairwiseBpr(scores, triplets))
    }

    /// Link reconstruction cross-entropy with logits `Z_i · Z_j`:
    /// `Σ −[y ln σ(x) + (1 − y) ln(1 − σ(x))]`.
    pub fn link_bce(&mut self, z: Var, links: Vec<(usize, usize, T)>) -> Result<Var> {
        let zv = self.value(z);
        let n = zv.rows();
        if let Some(&(i, j, _)) = links.iter().find(|&&(i, j, _)| i >= n || j >= n) {
            return Err(Error::IndexOutOfRange { index: i.max(j), len: n });
        }
        let loss: T = links
            .iter()
            .map(|&(i, j, y)| {
                let x = super::dense::dot(zv.row(i), zv.row(j));
                softplus(x) - y * x
            })
            .sum();
        self.push("link_bce", DenseTensor::scalar(loss), Op::LinkBce(z, links))
    }

    /// `Σ (s − A_i · B_j)²` over sparse entries `(i, j, s)`.
    pub fn factorization(&mut self, a: Var, b: Var, entries: Vec<(usize, usize, T)>) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.cols() {
            return Err(mismatch("factorization", av.shape(), bv.shape()));
        }
        if let Some(&(i, j, _)) = entries.iter().find(|&&(i, j, _)| i >= av.rows() || j >= bv.rows()) {
            return Err(Error::IndexOutOfRange {
                index: i.max(j),
                len: av.rows().min(bv.rows()),
            });
        }
        let loss: T = entries
            .iter()
            .map(|&(i, j, s)| {
                let e = s - super::dense::dot(av.row(i), bv.row(j));
                e * e
            })
            .sum();
        self.push("factorization", DenseTensor::scalar(loss), Op::Factorization(a, b, entries))
    }

    /// Gradients of the scalar `output` with respect to every recorded node.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        if self.value(output).len() != 1 {
            return Err(Error::ShapeMismatch {
                op: "backward",
                detail: format!("output must be scalar, got {:?}", self.value(output).shape()),
            });
        }
        let mut grads: Vec<Option<DenseTensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(DenseTensor::full(self.value(output).shape(), T::one()));

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let y = &node.value;
            match &node.op {
                Op::Constant | Op::Param(_) => {}
                Op::Spmm(s, x) => {
                    let d = DenseTensor::matrix(s.dim(), g.cols(), s.transpose_mul_dense(g.data(), g.cols()));
                    accumulate(&mut grads, *x, d);
                }
                Op::MatMul(a, b) => {
                    let da = matmul_a_bt(&g, self.value(*b));
                    let db = matmul_at_b(self.value(*a), &g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulBt(a, b) => {
                    let da = matmul(&g, self.value(*b));
                    let db = matmul_at_b(&g, self.value(*a));
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    let db = self.reduce_broadcast(*b, &g);
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, db);
                }
                Op::Sub(a, b) => {
                    let db = self.reduce_broadcast(*b, &g.map(|v| -v));
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, db);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let c = bv.cols();
                    let broadcast = !av.same_shape(bv);
                    let bat = |k: usize| if broadcast { bv.data()[k % c] } else { bv.data()[k] };
                    let mut da = g.clone();
                    for (k, x) in da.data_mut().iter_mut().enumerate() {
                        *x *= bat(k);
                    }
                    let prod = g.zip_map(av, |x, y| x * y);
                    let db = self.reduce_broadcast(*b, &prod);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Affine(a, alpha) => {
                    accumulate(&mut grads, *a, g.map(|v| v * *alpha));
                }
                Op::Sigmoid(a) => {
                    accumulate(&mut grads, *a, g.zip_map(y, |gv, s| gv * s * (T::one() - s)));
                }
                Op::Tanh(a) => {
                    accumulate(&mut grads, *a, g.zip_map(y, |gv, t| gv * (T::one() - t * t)));
                }
                Op::Gather(a, idx) => {
                    let src = self.value(*a);
                    let mut d = DenseTensor::zeros(src.shape());
                    for (r, &i) in idx.iter().enumerate() {
                        for (dst, &v) in d.row_mut(i).iter_mut().zip(g.row(r)) {
                            *dst += v;
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::Sum(a) => {
                    let gv = g.item();
                    accumulate(&mut grads, *a, DenseTensor::full(self.value(*a).shape(), gv));
                }
                Op::SumSquares(a) => {
                    let two_g = T::lit(2.0) * g.item();
                    accumulate(&mut grads, *a, self.value(*a).map(|v| two_g * v));
                }
                Op::PairwiseBpr(s, triplets) => {
                    let gv = g.item();
                    let sv = self.value(*s);
                    let mut d = DenseTensor::zeros(sv.shape());
                    let c = sv.cols();
                    for &(r, p, q) in triplets {
                        // d/dx softplus(−x) = −σ(−x)
                        let w = gv * sigmoid(-(sv.get(r, p) - sv.get(r, q)));
                        d.data_mut()[r * c + p] -= w;
                        d.data_mut()[r * c + q] += w;
                    }
                    accumulate(&mut grads, *s, d);
                }
                Op::LinkBce(z, links) => {
                    let gv = g.item();
                    let zv = self.value(*z);
                    let mut d = DenseTensor::zeros(zv.shape());
                    for &(i, j, label) in links {
                        let x = super::dense::dot(zv.row(i), zv.row(j));
                        let w = gv * (sigmoid(x) - label);
                        for k in 0..zv.cols() {
                            let (zi, zj) = (zv.get(i, k), zv.get(j, k));
                            d.row_mut(i)[k] += w * zj;
                            d.row_mut(j)[k] += w * zi;
                        }
                    }
                    accumulate(&mut grads, *z, d);
                }
                Op::Factorization(a, b, entries) => {
                    let gv = g.item();
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut da = DenseTensor::zeros(av.shape());
                    let mut db = DenseTensor::zeros(bv.shape());
                    for &(i, j, s) in entries {
                        let e = s - super::dense::dot(av.row(i), bv.row(j));
                        let w = -T::lit(2.0) * gv * e;
                        for k in 0..av.cols() {
                            da.row_mut(i)[k] += w * bv.get(j, k);
                            db.row_mut(j)[k] += w * av.get(i, k);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
            }
            grads[i] = Some(g);
        }

        for g in grads.iter().flatten() {
            if !g.is_finite() {
                return Err(Error::NonFinite("backward".into()));
            }
        }
        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(id) => Some((id, i)),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads, params })
    }

    /// Sums `g` over rows when `b` was row-broadcast.
    fn reduce_broadcast(&self, b: Var, g: &DenseTensor<T>) -> DenseTensor<T> {
        let bv = self.value(b);
        if bv.same_shape(g) {
            return g.clone();
        }
        let c = bv.cols();
        let mut out = DenseTensor::zeros(bv.shape());
        for (k, &v) in g.data().iter().enumerate() {
            out.data_mut()[k % c] += v;
        }
        out
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<DenseTensor<T>>], v: Var, d: DenseTensor<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&d),
        slot @ None => *slot = Some(d),
    }
}

/// Entries are 0 with probability `rate`, else `1 / (1 − rate)`.
pub fn dropout_mask<T: Scalar>(shape: &[usize], rate: f64, rng: &mut impl Rng) -> DenseTensor<T> {
    let keep = T::lit(1.0 / (1.0 - rate));
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
        .collect();
    DenseTensor::from_vec(shape.to_vec(), data).expect("mask shape")
}

/// Gradient buffers produced by [`Tape::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<DenseTensor<T>>>,
    params: Vec<(ParamId, usize)>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&DenseTensor<T>> {
        self.grads[v.0].as_ref()
    }

    /// Adds each parameter leaf's gradient to the store's gradient buffer.
    pub fn accumulate_into(&self, store: &mut ParamStore<T>) {
        for &(id, node) in &self.params {
            if let Some(g) = &self.grads[node] {
                store.param_mut(id).grad.add_assign(g);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::gradcheck::gradient_check;
    use rand::SeedableRng;

    type R = crate::seed::Rng;

    fn store_with(values: &[(&str, DenseTensor<f64>)]) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        for (n, v) in values {
            s.insert(*n, v.clone());
        }
        s
    }

    fn rand_matrix(rows: usize, cols: usize, seed: u64) -> DenseTensor<f64> {
        DenseTensor::uniform(rows, cols, -1.0, 1.0, &mut R::seed_from_u64(seed))
    }

    #[test]
    fn elementwise_basics() {
        let mut t = Tape::<f64>::new();
        let z = t.constant(DenseTensor::scalar(0.0)).unwrap();
        let s = t.sigmoid(z).unwrap();
        let h = t.tanh(z).unwrap();
        assert_eq!(t.scalar(s), 0.5);
        assert_eq!(t.scalar(h), 0.0);
        let x = t.constant(rand_matrix(3, 2, 1)).unwrap();
        let one = t.constant(DenseTensor::full(&[3, 2], 1.0)).unwrap();
        let y = t.mul(x, one).unwrap();
        assert_eq!(t.value(y), t.value(x));
    }

    #[test]
    fn shape_mismatches_are_errors() {
        let mut t = Tape::<f64>::new();
        let a = t.constant(DenseTensor::zeros(&[2, 3])).unwrap();
        let b = t.constant(DenseTensor::zeros(&[3, 2])).unwrap();
        assert!(matches!(t.add(a, b), Err(Error::ShapeMismatch { .. })));
        assert!(t.matmul(a, a).is_err());
        let s = SparseMatrix::<f64>::identity(3);
        assert!(t.spmm(&s, a).is_err());
        assert!(matches!(t.gather(a, &[2]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn non_finite_is_reported() {
        let mut t = Tape::<f64>::new();
        let a = t.constant(DenseTensor::scalar(f64::MAX)).unwrap();
        assert!(matches!(t.affine(a, 10.0, 0.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn spmm_identity_and_two_node() {
        let x = rand_matrix(4, 3, 2);
        let id = SparseMatrix::identity(4);
        let mut t = Tape::new();
        let xv = t.constant(x.clone()).unwrap();
        let y = t.spmm(&id, xv).unwrap();
        assert_eq!(t.value(y), &x);

        let lt = SparseMatrix::from_triplets(2, vec![(0, 1, -1.0), (1, 0, -1.0)]).unwrap();
        let e0 = t.constant(DenseTensor::matrix(2, 1, vec![1.0, 0.0])).unwrap();
        let y = t.spmm(&lt, e0).unwrap();
        assert_eq!(t.value(y).data(), &[0.0, -1.0]);
    }

    #[test]
    fn spmm_matches_dense_oracle() {
        let mut rng = R::seed_from_u64(9);
        let mut entries = Vec::new();
        for r in 0..8 {
            for c in 0..8 {
                if rng.random::<f64>() < 0.3 {
                    entries.push((r, c, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let s = SparseMatrix::from_triplets(8, entries).unwrap();
        let x = rand_matrix(8, 3, 10);
        let dense = DenseTensor::matrix(8, 8, s.to_dense());
        let want = matmul(&dense, &x);
        let mut t = Tape::new();
        let xv = t.constant(x).unwrap();
        let y = t.spmm(&s, xv).unwrap();
        assert!(t.value(y).max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn gather_backward_accumulates_repeats() {
        let store = store_with(&[("z", rand_matrix(4, 2, 3))]);
        let mut t = Tape::new();
        let z = t.param(&store, ParamId(0)).unwrap();
        let g = t.gather(z, &[2, 2]).unwrap();
        let s = t.sum(g).unwrap();
        let grads = t.backward(s).unwrap();
        let gz = grads.get(z).unwrap();
        assert_eq!(gz.row(2), &[2.0, 2.0]);
        assert_eq!(gz.row(0), &[0.0, 0.0]);

        // One-hot upstream through gather reproduces index selection.
        let mut t = Tape::new();
        let z = t.param(&store, ParamId(0)).unwrap();
        let g = t.gather(z, &[3, 1, 0]).unwrap();
        let onehot = t.constant(DenseTensor::matrix(3, 2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0])).unwrap();
        let m = t.mul(g, onehot).unwrap();
        let s = t.sum(m).unwrap();
        let grads = t.backward(s).unwrap();
        let gz = grads.get(z).unwrap();
        assert_eq!(gz.data(), &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn dropout_modes() {
        let mut rng = R::seed_from_u64(0);
        let x = DenseTensor::<f64>::full(&[300, 400], 1.0);
        let mut t = Tape::new();
        let v = t.constant(x.clone()).unwrap();
        assert_eq!(t.dropout(v, 0.0, true, &mut rng).unwrap(), v);
        assert_eq!(t.dropout(v, 0.5, false, &mut rng).unwrap(), v);
        assert!(t.dropout(v, 1.0, true, &mut rng).is_err());
        let d = t.dropout(v, 0.2, true, &mut rng).unwrap();
        let out = t.value(d);
        let survivors = out.data().iter().filter(|&&y| y != 0.0).count() as f64 / out.len() as f64;
        assert!((survivors - 0.8).abs() < 0.02, "survivor fraction {survivors}");
        let mean = out.sum() / out.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");

        let a = dropout_mask::<f64>(&[10, 10], 0.3, &mut R::seed_from_u64(5));
        let b = dropout_mask::<f64>(&[10, 10], 0.3, &mut R::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn sigmoid_of_linear_map_passes_gradient_check() {
        let store = store_with(&[("w", rand_matrix(3, 3, 4))]);
        let x = rand_matrix(3, 2, 5);
        let err = gradient_check(&store, 1e-5, |t, s| {
            let w = t.param(s, ParamId(0))?;
            let xv = t.constant(x.clone())?;
            let y = t.matmul(w, xv)?;
            let y = t.sigmoid(y)?;
            t.sum(y)
        })
        .unwrap();
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn linear_function_gradient_is_exact() {
        let store = store_with(&[("w", rand_matrix(3, 3, 6))]);
        let c = rand_matrix(3, 3, 7);
        let err = gradient_check(&store, 1e-5, |t, s| {
            let w = t.param(s, ParamId(0))?;
            let cv = t.constant(c.clone())?;
            let y = t.mul(w, cv)?;
            t.sum(y)
        })
        .unwrap();
        assert!(err < 1e-10, "relative error {err}");
    }

    #[test]
    fn every_op_passes_gradient_check() {
        let store = store_with(&[
            ("a", rand_matrix(4, 3, 11)),
            ("b", rand_matrix(3, 3, 12)),
            ("row", rand_matrix(1, 3, 13)),
            ("c", rand_matrix(4, 3, 14)),
        ]);
        let s = SparseMatrix::from_triplets(4, vec![(0, 1, 0.5), (1, 0, 0.5), (2, 2, -1.0), (3, 0, 2.0)]).unwrap();
        let err = gradient_check(&store, 1e-5, |t, st| {
            let a = t.param(st, ParamId(0))?;
            let b = t.param(st, ParamId(1))?;
            let row = t.param(st, ParamId(2))?;
            let c = t.param(st, ParamId(3))?;
            let x = t.spmm(&s, a)?;
            let x = t.matmul(x, b)?;
            let x = t.add(x, row)?;
            let x = t.mul(x, row)?;
            let x = t.sub(x, c)?;
            let x = t.tanh(x)?;
            let r = t.one_minus(x)?;
            let x = t.mul(x, r)?;
            let g = t.gather(x, &[1, 3, 1])?;
            let scores = t.matmul_bt(g, c)?;
            let bpr = t.pairwise_bpr(scores, vec![(0, 1, 2), (1, 0, 3), (2, 2, 2)])?;
            let bce = t.link_bce(c, vec![(0, 1, 1.0), (2, 3, 0.0), (1, 1, 1.0)])?;
            let fac = t.factorization(a, c, vec![(0, 2, 0.7), (3, 1, 1.2)])?;
            let reg = t.sum_squares(b)?;
            let sb = t.sub(x, c)?;
            let sg = t.sigmoid(sb)?;
            let sg = t.sum(sg)?;
            let l = t.add(bpr, bce)?;
            let l = t.add(l, fac)?;
            let l = t.add(l, reg)?;
            t.add(l, sg)
        })
        .unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }
}
