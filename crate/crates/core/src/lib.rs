//! Respiratory sound classification toolkit.
//!
//! The crate is split along the processing chain:
//!
//! - [`audio`]: WAV I/O, resampling, framing and synthetic test signals.
//! - [`augment`]: the five augmentation sets (time stretch, two pitch-shift
//!   sets, dynamic range compression, background noise) with replayable
//!   provenance records.
//! - [`features`]: power spectra, the MFCC baseline and the denoising
//!   autoencoder that produces 256-dimensional deep features.
//! - [`neuralnet`]: a small tensor engine with 1D convolution, pooling,
//!   batch normalization, dropout, dense layers, Adam and gradient checking.
//! - [`pipeline`]: manifests, user-level splits, the five binary tasks,
//!   training/evaluation orchestration and metrics.
//! - [`cli`]: the `respira` command-line front end.

pub mod audio;
pub mod augment;
pub mod cli;
mod error;
pub(crate) mod fsutil;
pub mod features;
pub mod neuralnet;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};

/// Toolkit version recorded in provenance sidecars and reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seed used whenever the caller does not supply one.
pub const DEFAULT_SEED: u64 = 20_210_611;
