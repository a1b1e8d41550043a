//! Error type shared by every module in the crate.

use std::path::PathBuf;

/// Errors produced by estimation, training, evaluation and persistence.
#[derive(Debug, thiserror::Error)]
pub enum VpoError {
    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A value overflowed the representable range.
    #[error("range error: {0}")]
    Range(String),

    /// A context or response id is outside the policy shape.
    #[error("{kind} index {index} out of range (size {size})")]
    Index {
        kind: &'static str,
        index: usize,
        size: usize,
    },

    /// Two tables (or a table and a dataset) disagree on shape.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A dataset line is not valid JSON.
    #[error("line {line}: malformed JSON: {message}")]
    Parse { line: usize, message: String },

    /// A dataset record lacks a field or has the wrong type for it.
    #[error("line {line}: field `{field}`: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },

    /// A dataset record is well-formed but semantically invalid.
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    /// A checkpoint or sidecar file is truncated or inconsistent.
    #[error("integrity error in {path}: {message}")]
    Integrity { path: PathBuf, message: String },

    /// The requested run cannot be configured from the given inputs.
    #[error("configuration error: {0}")]
    Config(String),

    /// A non-finite quantity appeared during training.
    #[error("numerical failure at step {step}: {message}")]
    Numerical { step: usize, message: String },

    /// Gradient check exceeded its tolerance.
    #[error("gradient check failed: {0}")]
    GradCheck(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl VpoError {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        VpoError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VpoError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 1 for validation and configuration errors, 2 for I/O and file
    /// integrity errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            VpoError::InvalidParameter { .. }
            | VpoError::Range(_)
            | VpoError::Index { .. }
            | VpoError::Shape(_)
            | VpoError::Parse { .. }
            | VpoError::Schema { .. }
            | VpoError::Validation { .. }
            | VpoError::Config(_) => 1,
            VpoError::Io { .. }
            | VpoError::Integrity { .. }
            | VpoError::Json(_)
            | VpoError::Csv(_) => 2,
            VpoError::Numerical { .. } | VpoError::GradCheck(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, VpoError>;
