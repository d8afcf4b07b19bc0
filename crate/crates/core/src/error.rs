use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("no convergence after {iterations} iterations: {what}")]
    NoConvergence { what: String, iterations: usize },

    #[error("undefined moment: {0}")]
    UndefinedMoment(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch} (c = {c}): loss was non-finite for 3 consecutive epochs")]
    Divergence { epoch: usize, c: f64 },

    #[error("sweep failed, every grid point diverged: {0}")]
    SweepFailed(String),

    #[error("quadrature did not reach tolerance: {0}")]
    Quadrature(String),

    #[error("non-finite value at probe of coordinate {coordinate}")]
    Probe { coordinate: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
