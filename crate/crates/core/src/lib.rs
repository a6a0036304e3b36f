//! Popularity-aware causal recommendation toolkit.
//!
//! The crate covers the full experimental loop for studying popularity bias
//! in implicit-feedback recommenders:
//!
//! - [`dataset`]: interaction-log ingestion, chronological staging and
//!   train/valid/test splitting, per-stage popularity and quality statistics.
//! - [`popularity`]: popularity-drift measurement (Jensen-Shannon based) and
//!   linear next-stage popularity forecasting.
//! - [`model`]: matrix-factorization scorers — deconfounded (PD),
//!   popularity-adjusted (PDA), and multi-behavior CTR/CVR/CTCVR scores with
//!   their inference and ablation variants.
//! - [`training`]: BPR and joint CTR+CTCVR optimization with negative
//!   sampling, L2 regularization and early stopping.
//! - [`evaluation`]: all-ranking top-K accuracy metrics plus the exposure
//!   fairness suite (group disparities, Spearman correlation).
//! - [`synth`]: a causal-graph interaction simulator with known ground truth,
//!   used to verify that deconfounding and adjustment behave as intended.
//! - [`experiment`]: config-file driven end-to-end pipelines with CSV
//!   artifacts and reproducible manifests.

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod model;
pub mod popularity;
pub mod rng;
pub mod synth;
pub mod training;

pub use error::Error;

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;
