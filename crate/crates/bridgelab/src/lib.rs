//! bridgelab: a desk-scale laboratory for diffusion-bridge translation.
//!
//! The crate builds the full pipeline on synthetic paired data: a
//! variance-preserving bridge schedule, the implicit bridge sampler with
//! booting noise, weighted denoiser training, a contrastive (PatchNCE +
//! LSGAN) translation track, the composite evaluation score, and a batch
//! CLI that ties them together. Every statistical claim the pipeline makes
//! is checked against an independent oracle somewhere in the test suite.

pub mod bridge;
pub mod cli;
pub mod cut;
pub mod data;
pub mod denoiser;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod tensor;
pub mod trainer;

pub use error::{BridgeError, Result};
pub use tensor::TensorF;
