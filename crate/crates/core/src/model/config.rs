use crate::error::{Error, Result};
use crate::tensor::OptimizerConfig;

/// How negatives are chosen for each lane's positive target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeSampling {
    /// The other lanes' targets at the same step.
    InBatch,
    /// `n` items drawn uniformly per batch, shared by every lane.
    Uniform(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaasrConfig {
    pub latent_dim: usize,
    pub cheb_order: usize,
    pub dropout_rate: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    pub negatives: NegativeSampling,
}

impl Default for CaasrConfig {
    fn default() -> Self {
        Self {
            latent_dim: 100,
            cheb_order: 3,
            dropout_rate: 0.2,
            batch_size: 50,
            learning_rate: 0.001,
            l2_lambda: 0.0,
            max_epochs: 30,
            seed: 0,
            rms_decay: OptimizerConfig::DEFAULT_DECAY,
            rms_epsilon: OptimizerConfig::DEFAULT_EPSILON,
            negatives: NegativeSampling::InBatch,
        }
    }
}

impl CaasrConfig {
    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            learning_rate: self.learning_rate,
            decay: self.rms_decay,
            epsilon: self.rms_epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.latent_dim == 0 {
            return bad("latent_dim must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} not in [0, 1)", self.dropout_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.l2_lambda >= 0.0) {
            return bad(format!("l2_lambda {} must be >= 0", self.l2_lambda));
        }
        if self.negatives == NegativeSampling::Uniform(0) {
            return bad("uniform negative count must be >= 1".into());
        }
        self.optimizer().validate()
    }
}
