//! Multimodal music popularity prediction.
//!
//! The crate covers the whole path from raw listening logs and audio
//! descriptors to a calibrated popularity score:
//!
//! - [`nn`]: a small dense-network engine with hand-derived gradients,
//!   Adam/AdamW, clipping, plateau scheduling and early stopping.
//! - [`ctd`]: career-trajectory features from timestamped listening events.
//! - [`onion`]: an ensemble of per-group autoencoders that compresses
//!   audio descriptors into one embedding.
//! - [`model`]: three modality experts fused by a learnable softmax gate,
//!   trained in two phases.
//! - [`data`]: cleaning, lyric normalization, stratified splits, scalers
//!   and a synthetic data generator with planted signals.
//! - [`eval`]: regression metrics and residual analysis.
//! - [`cli`]: the `gamenet` command-line driver.
//!
//! Runnable walkthroughs for each part live in `examples/`.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ctd;
pub mod data;
mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod onion;

pub use error::{Error, Result};
