use std::fmt;

/// Process exit statuses shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Io = 1,
    Usage = 2,
    Data = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        source: fdms_core::Error,
    },

    #[error(transparent)]
    Core(#[from] fdms_core::Error),
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        CliError::Data(msg.to_string())
    }

    /// Wraps a failure to read or write `what`; always exit status 1.
    pub fn io(what: impl fmt::Display, source: impl Into<fdms_core::Error>) -> Self {
        CliError::Io {
            context: what.to_string(),
            source: source.into(),
        }
    }

    pub fn status(&self) -> ExitStatus {
        use fdms_core::Error as E;
        match self {
            CliError::Usage(_) => ExitStatus::Usage,
            CliError::Data(_) => ExitStatus::Data,
            CliError::Io { .. } => ExitStatus::Io,
            CliError::Core(E::InvalidArgument(_)) => ExitStatus::Usage,
            CliError::Core(E::NoData(_)) => ExitStatus::Data,
            CliError::Core(E::Io(_) | E::Format { .. } | E::Validation(_)) => ExitStatus::Io,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
