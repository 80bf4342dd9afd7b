//! Core algorithms for dialogue segmentation and its label-distribution evaluation.
//!
//! This crate holds everything that is pure computation: transcript and codebook
//! domain types, the boundary/segment algebra, gold-label-free evaluation metrics
//! over rater label distributions, coherence-drop boundary decoding from utterance
//! embeddings, retrieval-based embedding fusion, seeded synthetic corpora, and a
//! percentile bootstrap for confidence intervals.
//!
//! File formats, network clients, and the command-line surface live in the
//! companion `dialseg` crate. This crate is `no_std` (with `alloc`) so the
//! algorithms stay free of IO concerns and run identically everywhere.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod boundary;
pub mod coherence;
pub mod embedding;
pub mod fingerprint;
pub mod fusion;
pub mod metrics;
pub mod seeding;
pub mod stats;
pub mod synth;
pub mod types;

pub use boundary::{BoundarySet, Segmentation};
pub use embedding::EmbeddingSequence;
pub use types::{Codebook, Dialogue, Move, RaterLabels, Utterance};
