use thiserror::Error;

/// Errors raised by the library. Incompatible right-hand sides are data
/// (see [`crate::fredholm::FredholmSolveReport`]), not errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("surface mismatch between operands")]
    SurfaceMismatch,

    #[error("singular kernel evaluation at coincident points")]
    SingularEvaluation,

    #[error("usage error: {0}")]
    Usage(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("oracle inconsistency for {kind} l={l} k={k}: formula {formula} vs quadrature {quadrature}")]
    OracleInconsistency {
        kind: String,
        l: usize,
        k: f64,
        formula: String,
        quadrature: String,
    },

    #[error("resonant wavenumber k={k} (nearest resonance {k_res} at l={l})")]
    Resonant { k: f64, k_res: f64, l: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
