//! Dense matrix kernels, neighborhood aggregation, a reverse-mode tape,
//! parameters with Adam, and checkpoints.

mod checkpoint;
mod kernels;
mod layers;
mod params;
mod tape;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, ParamEntry};
pub use kernels::{
    add_bias, aggregate, aggregate_backward, column_sums, matmul, matmul_nt, matmul_tn, relu,
    sigmoid, Aggregator,
};
pub use layers::{dense_layer, sage_layer, SageWeights};
pub use params::{Adam, ParamId, ParamStore, Parameter};
pub use tape::{class_weights, weighted_bce, Gradients, Tape, Var, PROB_CLAMP};

/// Matrices double as the tape's tensors.
pub type Tensor2 = crate::matrix::Matrix;
