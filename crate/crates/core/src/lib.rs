//! Frame-to-frame detection consistency and mAP evaluation over MOT-style
//! video sequences, with a deterministic image-correction pipeline and
//! seeded synthetic scenarios.
//!
//! The usual flow: [`mot::load_sequence`] a sequence, score it with
//! [`eval::evaluate_sequence`], and collect batches into
//! [`report::EvalRun`]s that [`report::compare`] can diff.

pub mod cli;
pub mod corrections;
pub mod error;
pub mod eval;
mod kv;
pub mod matching;
pub mod metrics;
pub mod mot;
pub mod report;
pub mod synth;

pub use error::{Error, Result};
