use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("series has {found} samples, at least {required} are required")]
    Size { found: usize, required: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// No segment is long enough for the requested step multiple.
    #[error("no segment admits step multiple M={m}; largest usable M is {max_usable}")]
    NoAdmissibleSegment { m: usize, max_usable: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("unknown model '{name}' (available: {available})")]
    UnknownModel { name: String, available: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
