//! Analytics core for stroke prediction from electronic health records.
//!
//! Everything in this crate is pure computation over in-memory data and builds
//! without `std` (only `alloc` is required). File formats, the command-line
//! front end and parallel execution live in the `stroke-workbench` crate.
//!
//! Module map:
//!
//! * [`ingest`] and [`synth`]: patient records, categorical encoding, BMI
//!   imputation and a seeded synthetic cohort generator.
//! * [`sampling`]: the seeded random source, balanced downsampling and
//!   (stratified) train/test splitting.
//! * [`stats`]: Pearson correlation, AUC feature importance and CHADS2 scoring.
//! * [`linalg`] and [`pca`]: cyclic Jacobi eigensolver and principal component
//!   analysis on standardized features.
//! * [`classifiers`]: MLP, CART, random forest, linear SVM, LASSO/elastic-net
//!   logistic regression and a small CNN behind one train/predict interface.
//! * [`metrics`]: confusion matrices, the six reported rates and run aggregation.
//! * [`experiments`]: repeated-holdout benchmarks and feature ablations.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod classifiers;
pub mod error;
pub mod experiments;

pub mod feature;
pub mod ingest;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod pca;
pub mod sampling;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use feature::Feature;
pub use ingest::{EhrRecord, EncodedMatrix, EncodingMap};
