use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("integer overflow in {0}")]
    Overflow(&'static str),

    #[error("{value} is not coprime to the modulus {modulus}")]
    NotCoprime { value: i64, modulus: u64 },

    #[error("coefficient table exhausted: no eigenvalue for prime {0}")]
    TableExhausted(u64),

    #[error("coefficient cache cap exceeded: requested {requested} entries, cap is {cap}")]
    CacheCap { requested: u64, cap: u64 },

    #[error("pole of {function} at {at}")]
    Pole { function: &'static str, at: String },

    #[error("singular factor {factor}: {detail}")]
    Singular { factor: String, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integrand envelope insufficient: {0}")]
    Envelope(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("truncation overflow: {0}")]
    TruncationOverflow(String),

    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
