//! Desk-scale transformer tagger with exact gradients.

mod config;
mod network;
mod params;
mod train;

pub use config::{Context, FreezeMask, Hyperparams, ModelConfig, Optimizer, MAX_SEQ_LEN};
pub use network::{embed_tokens, forward, loss, loss_and_grad, predict_labels, Example};
pub use params::{init_params, ParameterSet, Tensor};
pub use train::{train, train_epochs};
