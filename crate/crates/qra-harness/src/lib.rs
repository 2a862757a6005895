//! Experiment runner for the quantum reservoir autoencoder lab.
//!
//! Maps experiment identifiers to their noise conditions, runs batches of
//! protocol solves over (seed, trial, data-length) tuples with deterministic
//! per-tuple random streams, and aggregates results into summary tables with
//! paired significance tests.

pub mod cache;
pub mod config;
pub mod experiment;
pub mod selftest;
pub mod summary;

pub use config::{ExperimentConfig, ExperimentId};
pub use experiment::{run_experiment, RunResult};
pub use summary::{summarize, ComparisonRow, SummaryRow};
