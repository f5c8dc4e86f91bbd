//! Linear autoencoder recommenders with LLM-derived item semantics.
//!
//! EASE-family closed forms (plain, collective, additive, semantic) and the
//! two-phase distillation model `l3ae`, plus the data pipeline, evaluation
//! harness and brute-force oracles around them.

pub mod cli;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod models;
pub mod oracle;
pub mod synth;

pub use error::{Error, Result};
