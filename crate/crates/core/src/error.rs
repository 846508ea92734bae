use std::fmt;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where in an input a format error was detected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    /// Byte offset into a binary file.
    Offset(u64),
    /// Named RIFF chunk.
    Chunk(String),
    /// 1-based line number of a text file.
    Line(usize),
    /// Path of the offending file.
    File(PathBuf),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Offset(o) => write!(f, "byte offset {o}"),
            Location::Chunk(c) => write!(f, "chunk '{c}'"),
            Location::Line(l) => write!(f, "line {l}"),
            Location::File(p) => write!(f, "file {}", p.display()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error at {at}: {message}")]
    Format { at: Location, message: String },

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("no usable data: {0}")]
    NoData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(at: Location, msg: impl Into<String>) -> Self {
        Error::Format {
            at,
            message: msg.into(),
        }
    }
}
