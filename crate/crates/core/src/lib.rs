//! Admission-similarity graphs and GraphSAGE readmission models.
//!
//! The crate covers the whole pipeline: synthetic EHR-shaped tables
//! ([`datagen`]), cohort construction and labelling ([`ingest`]),
//! per-modality featurization ([`featurize`]), exact cosine range search
//! into a CSR graph ([`simgraph`]), a small reverse-mode autodiff core
//! ([`neuro`]), the classifiers and their training loop ([`models`]),
//! metrics and statistical tests ([`evalstat`]) and the staged,
//! hash-checked command runner ([`pipeline`]).

pub mod datagen;
pub mod error;
pub mod evalstat;
pub mod featurize;
pub mod hashing;
pub mod ingest;
pub mod matrix;
pub mod models;
pub mod neuro;
pub mod par;
pub mod pipeline;
pub mod schema;
pub mod simgraph;

pub use error::{Error, Result};
pub use matrix::Matrix;
