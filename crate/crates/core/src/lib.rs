//! Group-aware train/test splitting and linear probing for concept/attribute
//! datasets.
//!
//! Concepts that are alike (by an LLM pair list, embedding similarity,
//! K-Means clusters or a supercategory taxonomy) are kept on the same side of
//! every per-attribute split, so a probe cannot score well by recognising a
//! near-duplicate of a training concept. The correlation between probe
//! selectivity and supercategory dominance (CS) then indicates how much of
//! the measured performance is taxonomic leakage.

pub mod dataset;
pub mod embedding_ops;
pub mod error;
pub mod grouping;
pub mod llm_client;
pub mod metrics;
pub mod pipeline;
pub mod probe;
pub mod seed;
pub mod splitter;
pub mod synth;

pub use error::{Error, Result};
