//! Dense tensors, a reverse-mode tape, gradient checking and RMSprop.

pub mod checkpoint;
mod dense;
mod gradcheck;
mod params;
mod rmsprop;
mod tape;

pub use dense::{dot, matmul, matmul_a_bt, matmul_at_b, sigmoid, softplus, DenseTensor};
pub use gradcheck::{gradient_check, gradient_check_with, DEFAULT_CHECK_COORDS};
pub use params::{Param, ParamId, ParamStore};
pub use rmsprop::{rmsprop_step, OptimizerConfig};
pub use tape::{dropout_mask, Gradients, Tape, Triplet, Var};

/// Bounds of the uniform parameter initialization.
pub const INIT_RANGE: f64 = 0.1;
