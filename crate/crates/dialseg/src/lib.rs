//! Dialogue segmentation toolkit: file formats, corpus ingestion, LLM-backed
//! segmentation and annotation, and evaluation report emission.
//!
//! The algorithms themselves live in `dialseg-core`; this crate wraps them
//! with everything that touches the outside world and exposes the `dialseg`
//! command-line tool (validate, segment, evaluate, synth, annotate, plus a
//! canned-response mock server for offline LLM testing).

pub mod commands;
pub mod config;
pub mod formats;
pub mod ingest;
pub mod llm;
pub mod report;
pub mod rundir;

pub use dialseg_core as core;
