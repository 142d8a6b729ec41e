//! Association-augmented sequential recommendation.
//!
//! The pipeline: interaction logs are filtered and split into per-user item
//! sequences ([`ingest`]); the train split yields an item co-occurrence graph
//! whose rescaled Laplacian is expanded in a Chebyshev basis ([`graph`]); a
//! learned filter bank over that basis produces item embeddings that feed a
//! GRU next-item model trained with pairwise BPR loss ([`model`]). Five
//! comparison models live in [`baselines`], the evaluation protocol in
//! [`eval`], and a planted-structure data generator in [`synth`].
//!
//! Numeric code is generic over [`Scalar`]; the `*64` aliases below fix it
//! to `f64`, which is what the trainers and the CLI use.

// Validation uses `!(x >= lo)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod model;
mod scalar;
pub mod seed;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type SparseMatrix64 = graph::SparseMatrix<f64>;
pub type ChebyshevBasis64 = graph::ChebyshevBasis<f64>;
pub type DenseTensor64 = tensor::DenseTensor<f64>;
pub type ParamStore64 = tensor::ParamStore<f64>;
pub type Tape64<'a> = tensor::Tape<'a, f64>;

pub type CaasrParams64 = model::CaasrParams<f64>;
pub type GruWeights64 = model::GruWeights<f64>;
pub type TrainOutcome64 = model::TrainOutcome<f64>;
pub type Adjacency64 = graph::Adjacency<f64>;
