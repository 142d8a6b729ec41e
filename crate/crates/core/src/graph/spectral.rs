use crate::error::{Error, Result};
use crate::Scalar;

use super::SparseMatrix;

/// Entries smaller than this are dropped after each Chebyshev recursion step.
pub const CHEBYSHEV_PRUNE: f64 = 1e-12;
pub const DEFAULT_LAMBDA_TOL: f64 = 1e-6;
pub const DEFAULT_LAMBDA_ITERS: usize = 1000;

/// Upper bound on the spectrum of a normalized Laplacian.
pub const LAPLACIAN_SPECTRAL_BOUND: f64 = 2.0;

/// `L = I - D^{-1/2} A D^{-1/2}`.
///
/// Degree-zero nodes keep an identity row: their scaling factor is taken as
/// zero, so only the `I` term survives.
pub fn normalized_laplacian<T: Scalar>(a: &SparseMatrix<T>) -> Result<SparseMatrix<T>> {
    if !a.is_symmetric(T::zero()) {
        return Err(Error::Contract("adjacency is not symmetric".into()));
    }
    let n = a.dim();
    let inv_sqrt_deg: Vec<T> = (0..n)
        .map(|i| {
            let d: T = a.row(i).map(|(_, v)| v).sum();
            if d > T::zero() {
                T::one() / d.sqrt()
            } else {
                T::zero()
            }
        })
        .collect();
    let mut entries = Vec::with_capacity(a.nnz() + n);
    for i in 0..n {
        let mut has_diag = false;
        for (j, v) in a.row(i) {
            let w = -v * inv_sqrt_deg[i] * inv_sqrt_deg[j];
            if i == j {
                has_diag = true;
                entries.push((i, j, T::one() + w));
            } else if w != T::zero() {
                entries.push((i, j, w));
            }
        }
        if !has_diag {
            entries.push((i, i, T::one()));
        }
    }
    SparseMatrix::from_triplets(n, entries)
}

/// Deterministic, generic start vector for power iteration.
fn start_vector<T: Scalar>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| {
            let x = (i as f64 + 1.0) * 0.618_033_988_749_895;
            T::lit(0.5 + (x - x.floor()))
        })
        .collect()
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
///
/// Stops once the eigen-residual `‖Lv − ρv‖` is within `tol · ρ`; if that
/// does not happen within `max_iters` the normalized-Laplacian bound 2 is
/// returned, which keeps the rescaled spectrum inside `[-1, 1]`.
pub fn estimate_lambda_max<T: Scalar>(l: &SparseMatrix<T>, tol: T, max_iters: usize) -> Result<T> {
    if !l.is_symmetric(T::lit(1e-12)) {
        return Err(Error::Contract("matrix is not symmetric".into()));
    }
    let n = l.dim();
    let fallback = T::lit(LAPLACIAN_SPECTRAL_BOUND);
    if n == 0 {
        return Ok(fallback);
    }
    let mut v = start_vector::<T>(n);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    for _ in 0..max_iters {
        let w = l.mul_vec(&v);
        let rho: T = v.iter().zip(&w).map(|(&a, &b)| a * b).sum();
        let residual = norm(
            &w.iter()
                .zip(&v)
                .map(|(&wi, &vi)| wi - rho * vi)
                .collect::<Vec<_>>(),
        );
        if residual <= tol * rho.abs() {
            return Ok(rho);
        }
        let nw = norm(&w);
        if nw == T::zero() || !nw.is_finite() {
            break;
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    Ok(fallback)
}

/// `L̃ = (2 / λ_max) L − I`.
pub fn rescale_laplacian<T: Scalar>(l: &SparseMatrix<T>, lambda_max: T) -> Result<SparseMatrix<T>> {
    if !(lambda_max > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "lambda_max must be positive, got {lambda_max}"
        )));
    }
    let identity = SparseMatrix::identity(l.dim());
    Ok(l.linear_combination(T::lit(2.0) / lambda_max, &identity, -T::one(), T::zero()))
}

/// Chebyshev polynomials `T_0 .. T_K` of the rescaled Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevBasis<T> {
    terms: Vec<SparseMatrix<T>>,
}

impl<T: Scalar> ChebyshevBasis<T> {
    pub fn from_terms(terms: Vec<SparseMatrix<T>>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::InvalidArgument("basis needs at least T_0".into()));
        };
        let n = first.dim();
        if terms.iter().any(|t| t.dim() != n) {
            return Err(Error::ShapeMismatch {
                op: "chebyshev_basis",
                detail: "terms differ in dimension".into(),
            });
        }
        Ok(Self { terms })
    }

    /// Basis of order 0 over `n` items: just the identity.
    pub fn identity(n: usize) -> Self {
        Self {
            terms: vec![SparseMatrix::identity(n)],
        }
    }

    /// Highest polynomial order `K`.
    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.terms[0].dim()
    }

    pub fn terms(&self) -> &[SparseMatrix<T>] {
        &self.terms
    }

    pub fn term(&self, k: usize) -> &SparseMatrix<T> {
        &self.terms[k]
    }
}

/// `T_0 = I`, `T_1 = L̃`, `T_k = 2 L̃ T_{k−1} − T_{k−2}`.
pub fn chebyshev_basis<T: Scalar>(l_tilde: &SparseMatrix<T>, order: usize) -> ChebyshevBasis<T> {
    let prune = T::lit(CHEBYSHEV_PRUNE);
    let mut terms = vec![SparseMatrix::identity(l_tilde.dim())];
    if order >= 1 {
        terms.push(l_tilde.clone());
    }
    for k in 2..=order {
        let next = l_tilde
            .matmul(&terms[k - 1], T::zero())
            .linear_combination(T::lit(2.0), &terms[k - 2], -T::one(), prune);
        terms.push(next);
    }
    ChebyshevBasis { terms }
}

/// Full spectral preprocessing: Laplacian, λ_max estimate, rescaling, basis.
pub fn basis_from_adjacency<T: Scalar>(a: &SparseMatrix<T>, order: usize) -> Result<ChebyshevBasis<T>> {
    let l = normalized_laplacian(a)?;
    let lambda = estimate_lambda_max(&l, T::lit(DEFAULT_LAMBDA_TOL), DEFAULT_LAMBDA_ITERS)?;
    let lt = rescale_laplacian(&l, lambda)?;
    Ok(chebyshev_basis(&lt, order))
}
