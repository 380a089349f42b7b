//! The sequence model: cascade cross-attention over a long context, causal
//! self-attention over the query slots, training, and autoregressive
//! generation.

mod backward;
mod forward;
mod params;
mod sample;
mod train;

pub use backward::{backward, compute_gradients, loss_grad};
pub use forward::{forward, forward_inputs, loss, ForwardCache};
pub use params::{
    count_params, load_checkpoint, save_checkpoint, AttentionWeights, CrossLayerParams,
    FfnWeights, LayerNormParams, ModelConfig, Parameters, SelfLayerParams, FFN_MULT,
};
pub use sample::{generate, nucleus_filter, sample_index, SamplingConfig};
pub use train::{noam_rate, train_step, AdamState, TrainConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    BadConfig(String),
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: String },
    #[error("non-finite gradient in {tensor}")]
    NonFiniteGradient { tensor: String },
    #[error("every target in the batch is ignored")]
    AllTargetsIgnored,
    #[error("mask construction failed: {0}")]
    Mask(#[from] crate::mask::MaskError),
    #[error("checkpoint malformed: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
