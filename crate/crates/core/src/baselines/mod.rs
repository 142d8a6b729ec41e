//! Comparison models: BPR matrix factorization, BPR with item KNN, and the
//! two parallel-coupling variants that attach association structure to the
//! GRU through an auxiliary loss instead of convolution.

pub mod bpr;
pub mod cofactor;
pub mod graphae;

pub use bpr::{
    bpr_knn_predict, bpr_knn_predict_with, bpr_train, BprConfig, BprOutcome, BprParams, BprRecommender, KnnQuery,
    KnnRecommender,
};
pub use cofactor::{cofactor_train, CofactorConfig, CofactorObjective, CofactorParams};
pub use graphae::{graphae_train, sample_non_edges, GraphAeConfig, GraphAeObjective, GraphAeParams};
