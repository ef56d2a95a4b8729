//! Zero-shot Android malware detection over sensitive-API call graphs.
//!
//! The library turns per-app call listings into API call graphs, embeds each
//! graph with a variational graph auto-encoder (VGAE), learns a Siamese
//! similarity function over the embeddings, and labels unseen apps by their
//! averaged similarity to a benign support set. Malware families never seen
//! during training are flagged because their graphs fail to resemble benign
//! behavior, not because the classifier memorized them.
//!
//! Modules follow the pipeline order:
//!
//! - [`numerics`]: matrices, layers, optimizers, gradient checking
//! - [`callgraph`]: vocabularies, call listings, graph construction
//! - [`vgae`]: graph auto-encoder, training, embeddings
//! - [`snn`]: Siamese similarity network
//! - [`zeroshot`]: support sets and verdicts
//! - [`dataset`]: manifests, family-disjoint splits, synthetic corpora
//! - [`eval`]: confusion counts, metrics, threshold sweeps
//! - [`pipeline`]: configuration and the command runner behind the CLI
//!
//! Each major capability has a runnable demo under `examples/`; start with
//! `cargo run --example end_to_end`.

pub mod callgraph;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod numerics;
pub mod persist;
pub mod pipeline;
pub mod seeds;
pub mod snn;
pub mod vgae;
pub mod zeroshot;

pub use error::{Error, Result};
