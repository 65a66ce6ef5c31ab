use thiserror::Error;

/// Errors raised by the library. Variants map onto CLI exit codes in [`crate::cli`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("Feller condition violated: {0}")]
    FellerViolated(String),

    #[error("fraction must lie strictly inside (0, 1), got {name} = {value}")]
    InvalidFraction { name: &'static str, value: f64 },

    #[error("ordering violated: {0}")]
    Ordering(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("path {index}: {source}")]
    Path {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
