//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A location falls outside the interval covered by a history.
    #[error("location {x} outside interval [{a}, {b}]")]
    OutsideInterval { x: f64, a: f64, b: f64 },

    /// A length or value does not lie on the configured grid.
    #[error("{what} {value} is not aligned with the grid")]
    OffGrid { what: &'static str, value: f64 },

    /// A parameter fails its validity condition.
    #[error("{0}")]
    InvalidParameter(String),

    /// A table's metadata does not match the run configuration.
    #[error("value table does not match run configuration: {0}")]
    TableMismatch(String),

    /// The brute-force oracle refuses combinatorially large instances.
    #[error("oracle grid too large: {interior} interior points exceeds limit {max}")]
    GridTooLarge { interior: usize, max: usize },

    /// A serialized table file is malformed.
    #[error("malformed table file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
