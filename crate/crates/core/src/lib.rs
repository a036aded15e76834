//! Metric learning for text similarity.
//!
//! A small masked-language encoder is trained under a joint objective: a
//! margin triplet loss over angular distance plus a masked-token
//! reconstruction loss, with in-batch hard-negative mining. Catalog items
//! (a title and a description each) are then ranked by the sum of the
//! angular distances between their pooled title and description embeddings,
//! and rankings are scored with MPR, MRR and HR@k against expert
//! annotations.
//!
//! Module map:
//!
//! - [`geometry`]: cosine similarity, angular distance and their gradients
//! - [`losses`]: triplet, pair, masked-language and combined losses
//! - [`encoder`]: toy transformer encoder with hand-written backward pass,
//!   masking and checkpoints
//! - [`mining`]: in-batch hard and random negative selection
//! - [`trainer`]: training loop, optimizer and the ablation variants
//! - [`inference`]: catalog embedding, pairwise scoring and ranking
//! - [`evaluation`]: ranking metrics and variant comparison
//! - [`data`]: catalog/annotation files, tokenizer and synthetic corpora
//! - [`cli`]: the `textmetric` command-line surface
//!
//! See the crate's `examples/` directory for one runnable program per
//! capability.

pub mod cli;
pub mod data;
pub mod encoder;
mod error;
pub mod evaluation;
pub mod geometry;
pub mod inference;
pub mod losses;
pub mod mining;
pub mod trainer;
pub(crate) mod util;

pub use error::{Error, Result};
