use alloc::string::String;

/// Errors produced by the analytics core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,
    #[error("unknown level {level:?} for feature {feature}")]
    UnknownLevel { feature: String, level: String },
    #[error("class balance must lie strictly between 0 and 1, got {0}")]
    InvalidBalance(f64),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("no minority (stroke-positive) samples")]
    NoMinoritySamples,
    #[error("majority class has {majority} rows but minority has {minority}")]
    MajoritySmallerThanMinority { majority: usize, minority: usize },
    #[error("too few rows: {0}")]
    TooFewRows(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("zero variance in column {0}")]
    ZeroVariance(String),
    #[error("only one class present in the labels")]
    SingleClass,
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("eigensolver did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("training loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("confusion matrix is empty")]
    EmptyConfusion,
    #[error("invalid label {0}, expected 0 or 1")]
    InvalidLabel(u8),
}

pub type Result<T> = core::result::Result<T, Error>;
