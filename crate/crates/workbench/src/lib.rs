//! Std companion to `stroke-core`: the patient CSV format, artifact writers,
//! configuration files, run manifests, a Rayon-backed run executor and the
//! `strokebench` command line.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod manifest;
pub mod output;
pub mod parallel;

pub use dataset::{load_records, parse_csv, Dataset, DatasetError};
pub use parallel::RayonExecutor;
