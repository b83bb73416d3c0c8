use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("shell out of range: {0}")]
    Range(String),
    #[error("index outside the admissible set: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("grid too large for the brute-force oracle: {0}")]
    CostGuard(String),
    #[error("quadrature did not converge: {0}")]
    Accuracy(String),
    #[error("missing input: {0}")]
    Input(String),
    #[error("blow-up detected at t = {t} (last good time {last_good_t})")]
    BlowUp { t: f64, last_good_t: f64 },
    #[error("fixed-point iteration is not contracting: {0}")]
    NonContraction(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
