//! Kernel mutual-information regularized multi-task autoencoders.
//!
//! The latent code of a shared encoder is trained to classify, reconstruct and
//! carry as little matrix-based Rényi information about the raw input as the
//! task allows. Four baseline objectives share the same network and trainer.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataio;
pub mod densemath;
pub mod error;
pub mod evalreport;
pub mod gradcheck;
pub mod kernelinfo;
pub mod neuralnet;
pub mod objectives;
pub mod trainer;

pub use error::{Error, Result};
