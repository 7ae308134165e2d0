//! Scoring and filtering kernels for noisy parallel corpora.
//!
//! The crate is `no_std` + `alloc`: everything here is pure computation over
//! in-memory tables. File formats, parallel drivers, and the CLI live in the
//! companion `bitfilt` crate.
//!
//! Pipeline shape: a language-ID gate masks pairs whose source side is not
//! dominantly in the expected language; two margin-based k-NN scores (one per
//! embedding role) and a trained pair-classifier score are fused by plain
//! summation, optionally after per-component min-max normalization; the fused
//! ranking is cut at an English-side token budget.

#![no_std]

extern crate alloc;

pub mod bucc;
pub mod classifier;
pub mod combine;
pub mod embedding;
pub mod error;
pub mod langid;
pub mod margin;
pub mod negatives;
pub mod rng;
pub mod score;

pub use embedding::EmbeddingMatrix;
pub use error::CoreError;
pub use score::{ScoreEntry, ScoreTable};
