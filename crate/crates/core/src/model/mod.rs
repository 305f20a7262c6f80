//! Fully connected classifier.
//!
//! Each hidden layer is linear → batch norm → ReLU → inverted dropout; the
//! output layer is linear → softmax. Training minimises class-weighted
//! cross-entropy plus an L2 penalty on weight matrices with Adam (or plain
//! SGD), mini-batches and early stopping on validation loss.

mod config;
mod io;
pub(crate) mod kernels;
mod mlp;
mod train;

pub use config::{ModelConfig, Optimizer};
pub use io::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use mlp::{
    count_parameters, softmax_rows, BnMode, Dense, ForwardCache, ForwardOptions, Gradients, Hidden, Mlp,
};
pub use train::{
    backward_and_step, batch_from_features, dataset_loss, train, Adam, EpochRecord, TrainHistory, Trainer,
};
