//! The unified multi-channel convolutional classifier.
//!
//! Each context-view pair feeds one channel: 3x3 same convolution, ReLU,
//! 2x2 max pooling. The flattened maps are concatenated with the user's
//! applicability one-hot and the query context, then pass through one ReLU
//! hidden layer and a softmax over the target view's labels.

mod checkpoint;
mod config;
mod inputs;
mod network;
mod params;
mod train;

use thiserror::Error;

pub use checkpoint::{Checkpoint, TensorRecord, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{ChannelSpec, Conditioning, ModelConfig};
pub use inputs::{build_examples, context_features, user_input, user_inputs};
pub use network::{
    check_example, forward, forward_batch, loss_and_gradients, mean_loss, predict_proba,
    predict_proba_batch, predict_topk, rank_labels, top_k, ForwardCache, TrainingExample,
    UserInput,
};
pub use params::{glorot_bound, init_params, ConvParams, UnifiedModelParams};
pub use train::{train, EpochLog, TrainOutcome};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("no training examples")]
    NoTrainingData,
    #[error("training diverged at epoch {epoch}, step {step} (batch loss {loss})")]
    Divergence {
        epoch: usize,
        step: usize,
        loss: f64,
    },
    #[error("K = {k} outside 1..={classes}")]
    BadK { k: usize, classes: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
