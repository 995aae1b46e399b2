//! Sentiment manipulation by latent-space traversal.
//!
//! A convolutional encoder maps a sentence to a feature vector `z`. The
//! vector is moved toward the opposite-sentiment distribution by minimizing
//! an MMD witness function plus a budget-of-change penalty, and a GRU
//! decoder regenerates a sentence from the result.

pub mod atomic;
pub mod cli;
pub mod data;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod kernels;
pub mod model;
pub mod numerics;
pub mod optim;
pub mod pca;
pub mod pipeline;
pub mod transfer;
pub mod traversal;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use model::Model;
