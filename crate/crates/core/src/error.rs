use thiserror::Error;

/// Errors raised by the geometry kernel.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("jet order exceeded: need order {needed}, have {available}")]
    OrderExceeded { needed: usize, available: usize },

    #[error("derivative domain error: {function} undefined at constant term {value}")]
    DerivativeDomain { function: &'static str, value: f64 },

    #[error("singular matrix: pivot {pivot:e} at column {column}")]
    Singular { column: usize, pivot: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("point outside domain: {0}")]
    Domain(String),

    #[error("metric not positive-definite: {0}")]
    Definiteness(String),

    #[error("field is not parallel: |grad| = {0:e}")]
    NotParallel(f64),

    #[error("missing potential: {0}")]
    MissingPotential(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
