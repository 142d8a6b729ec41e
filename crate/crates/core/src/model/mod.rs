//! The association-augmented GRU recommender and its plain GRU special case.

mod batch;
mod config;
mod embed;
mod gru;
mod predict;
mod train;

pub use batch::{SessionBatch, SessionCursor};
pub use config::{CaasrConfig, NegativeSampling};
pub use embed::{graph_embed, graph_embed_tape, theta_name, CaasrParams};
pub use gru::{
    apply_reset, gru_param_names, gru_step, gru_step_values, init_gru, score_triplet, GruIds, GruVars, GruWeights,
};
pub use predict::{predict_topk, top_indices, GruRecommender};
pub use train::{
    batch_loss, format_loss_trace, recommender, train, train_gru4rec, train_sequential, BatchLoss, CaasrObjective,
    EpochRngs, Gru4RecObjective, SequentialObjective, TrainOutcome,
};


use crate::tensor::softplus;
use crate::Scalar;

/// `Σ −ln σ(r̂) + (λ/2)·‖Ω‖²` for already-computed triplet scores.
pub fn bpr_loss<T: Scalar>(scores: &[T], params: &CaasrParams<T>, l2_lambda: T) -> T {
    let data: T = scores.iter().map(|&r| softplus(-r)).sum();
    data + l2_lambda / T::lit(2.0) * params.sq_norm()
}
