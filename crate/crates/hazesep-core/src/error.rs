//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Two grids that must agree in shape do not.
    #[error("shape mismatch in {context}: {expected_rows}x{expected_cols} vs {actual_rows}x{actual_cols}")]
    ShapeMismatch {
        context: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        actual_rows: usize,
        actual_cols: usize,
    },

    /// Malformed grid contents (empty, ragged, or non-finite).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// FFT input length is not a power of two.
    #[error("fft length {0} is not a power of two (zero-pad the input)")]
    FftLength(usize),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// A numeric failure at runtime (divergence, non-finite iterate).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Malformed file contents (URF1, checkpoint, mask, manifest).
    #[error("format error: {0}")]
    Format(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CoreError {
    pub(crate) fn shape(
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    ) -> Self {
        CoreError::ShapeMismatch {
            context,
            expected_rows: expected.0,
            expected_cols: expected.1,
            actual_rows: actual.0,
            actual_cols: actual.1,
        }
    }
}
