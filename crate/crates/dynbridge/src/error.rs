use thiserror::Error;

/// Errors surfaced by kernel evaluation, time-change validation and filtering.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity: {0}")]
    Singularity(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate filter (ESS = {ess:.2}) at s = {s}: {detail}")]
    DegenerateFilter { s: f64, ess: f64, detail: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
