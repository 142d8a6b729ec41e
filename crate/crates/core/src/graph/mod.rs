//! Item co-occurrence graph and its spectral machinery.

mod cooccur;
pub mod io;
mod sparse;
mod spectral;
mod sppmi;

pub use cooccur::{build_adjacency, count_cooccurrence, Adjacency, CooccurrenceCounts};
pub use sparse::SparseMatrix;
pub use spectral::{
    basis_from_adjacency, chebyshev_basis, estimate_lambda_max, normalized_laplacian,
    rescale_laplacian, ChebyshevBasis, CHEBYSHEV_PRUNE, DEFAULT_LAMBDA_ITERS, DEFAULT_LAMBDA_TOL,
};
pub use sppmi::build_sppmi;
