//! Errors shared by the model trainers.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("feature schema mismatch: model expects width {expected}, input has {actual}")]
    SchemaMismatch { expected: usize, actual: usize },
    #[error("model file error: {0}")]
    Serialization(String),
}
