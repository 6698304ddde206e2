use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] cnls::Error),

    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot encode {what}: {message}")]
    Encode { what: String, message: String },

    #[error("identity audit failed: {0}")]
    AuditFailed(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 2 numerical failure, 3 invalid configuration, 4 I/O.
    pub fn exit_code(&self) -> u8 {
        use cnls::Error as E;
        match self {
            Self::Config(_) => 3,
            Self::Core(E::InvalidGrid(_) | E::InvalidParams(_) | E::Refused(_)) => 3,
            Self::Core(E::Io(_) | E::Csv(_) | E::Format(_)) => 4,
            Self::Core(_) | Self::AuditFailed(_) => 2,
            Self::Io { .. } | Self::Encode { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
