//! A workbench for retrieval-augmented n-gram language modeling.
//!
//! The pipeline: tokenize a corpus, train a Witten-Bell n-gram base model,
//! encode every training context into a fixed-dimensional key, store
//! (key, next-token) pairs in a datastore, index the keys (exact or IVF-PQ),
//! and at evaluation time mix the base model with a distance-weighted
//! distribution over retrieved neighbors. On top of that sit diagnostics that
//! stratify retrieval quality by token frequency: hit rates, key-cloud
//! dispersion, neighborhood contamination, and quantization error.

pub mod baselm;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod diagnostics;
pub mod error;
pub mod knnlm;
pub mod synth;
pub mod util;
pub mod vindex;

pub use error::{Error, Result};
