//! Shared error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),
    #[error("invalid block pattern: {0}")]
    InvalidPattern(String),
    #[error("singular local matrix at anchor {anchor:?} (condition estimate {cond:.3e})")]
    SingularLocalMatrix { anchor: [i64; 2], cond: f64 },
    #[error("linear algebra backend failure: {0}")]
    Linalg(String),
    #[error("multigrid divergence: residual ratios persistently above {0}")]
    Divergence(f64),
    #[error("configuration error: {0}")]
    Config(String),
}

impl From<ndarray_linalg::error::LinalgError> for CoreError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        CoreError::Linalg(e.to_string())
    }
}
