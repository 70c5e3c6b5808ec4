use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },

    #[error("non-finite iterate at iteration {iteration}; step size or lambda too large")]
    Diverged { iteration: usize },

    #[error("malformed PGM: {0}")]
    MalformedPgm(String),

    #[error("unsupported PGM maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),

    #[error("truncated PGM payload: expected {expected} bytes, found {found}")]
    TruncatedPgm { expected: usize, found: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
