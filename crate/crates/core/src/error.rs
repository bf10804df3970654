use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Point, ball or parameter outside the admissible domain.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    /// Requested derivative order, field kind or dimension is not supported.
    #[error("capability error: {0}")]
    Capability(String),
    #[error("degenerate point: no admissible radius above {tol} at {at}")]
    Degenerate { at: String, tol: f64 },
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
