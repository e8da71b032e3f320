use thiserror::Error;

/// Errors raised by the model, simulator and statistics code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("address ({row}, {col}) out of bounds for {rows}x{cols} array")]
    Address {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    /// Operation applied to a cell holding the wrong kind of state.
    #[error("type error: {0}")]
    Type(String),

    /// A coupled device cannot realise the requested variance.
    #[error("requested sigma {requested} outside achievable range [{lo}, {hi}]")]
    Programmability { requested: f64, lo: f64, hi: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
