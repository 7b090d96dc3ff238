//! A small tensor engine for 1D convolutional classifiers: layer
//! operations, shape inference, training with Adam, checkpoints and
//! gradient checking.

mod adam;
pub mod checkpoint;
pub mod config;
pub mod gradcheck;
pub mod network;
pub mod ops;
mod tensor;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, Container, TrainingHistory};
pub use config::{profile_names, LayerSpec, LossKind, ModelConfig, Shape};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use network::{Mode, Network, Sequential};
pub use ops::{batchnorm, conv1d, cross_entropy, dense, msle_loss, output_length, pool1d, softmax, BnMode, PoolMode, RunningStats};
pub use tensor::Tensor;
