//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("empty feature file: {0}")]
    EmptyFeatureFile(String),

    #[error("inconsistent column count at row {row}: expected {expected}, found {found}")]
    InconsistentColumns {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("unparseable number at row {row}, column {column}: {token:?}")]
    UnparseableNumber {
        row: usize,
        column: usize,
        token: String,
    },

    #[error("dimension mismatch: {context} expects {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("modality dimension below class count: d{modality} = {dim} < c = {classes}")]
    DimensionBelowClassCount {
        modality: usize,
        dim: usize,
        classes: usize,
    },

    #[error("label entry at row {row}, column {column} is not 0 or 1")]
    NonBinaryLabel { row: usize, column: usize },

    #[error("zero label row at index {0}")]
    ZeroLabelRow(usize),

    #[error("degenerate split sizes: {train} train / {test} test from {total} samples")]
    DegenerateSplit {
        train: usize,
        test: usize,
        total: usize,
    },

    #[error("HSIC undefined for n<2")]
    HsicTooFewSamples,

    #[error("matrix is not orthonormal: defect {defect:.3e}")]
    NotOrthonormal { defect: f64 },

    #[error("vector is not tangent at the base point: defect {defect:.3e}")]
    NotTangent { defect: f64 },

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite {
        what: &'static str,
        iteration: usize,
    },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("zero-norm projection")]
    ZeroNormProjection,

    #[error("zero-norm projection at {side} row {row}")]
    ZeroNormRow { side: &'static str, row: usize },

    #[error("malformed model file at line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
