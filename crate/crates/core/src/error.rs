use thiserror::Error;

use crate::coupling::ContractionReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("zero pivot at row {row} (|d| = {pivot:e}, threshold {threshold:e})")]
    ZeroPivot { row: usize, pivot: f64, threshold: f64 },

    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("negative curvature at conjugate-gradient iteration {0}; matrix is not positive definite")]
    Indefinite(usize),

    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("nonpositive Jacobian determinant {det:e} in cell {cell}")]
    Jacobian { cell: usize, det: f64 },

    #[error("boundary conditions: {0}")]
    Boundary(String),

    #[error("missing Dirichlet pressure on face {0}")]
    MissingDirichlet(usize),

    #[error("invalid material parameter `{field}`: {reason}")]
    Material { field: String, reason: String },

    #[error("return map failed: {0}")]
    ReturnMap(String),

    #[error("Newton iteration did not converge in {iterations} iterations (relative residual {residual:e})")]
    Newton { iterations: usize, residual: f64 },

    #[error("fixed-stress coupling did not converge in {iterations} iterations")]
    CouplingNotConverged { iterations: usize, reports: Vec<ContractionReport> },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn material(field: &str, reason: impl Into<String>) -> Self {
        Error::Material { field: field.to_string(), reason: reason.into() }
    }

    pub fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config { field: field.to_string(), message: message.into() }
    }
}
