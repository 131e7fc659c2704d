use std::io;
use std::path::PathBuf;

/// Failures of a CLI run, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    /// Malformed input file, with the position the parser stopped at.
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    InvalidInput {
        path: PathBuf,
        source: chebyquad_core::Error,
    },

    #[error(transparent)]
    Library(#[from] chebyquad_core::Error),

    /// Outputs were produced but fail their checks.
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 ok, 1 usage or validation, 2 verification failure, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use chebyquad_core::Error as E;
        match self {
            Self::Usage(_) | Self::Io { .. } | Self::Parse { .. } | Self::InvalidInput { .. } => 1,
            Self::Verification(_) => 2,
            Self::Library(e) => match e {
                E::Validation { .. }
                | E::Parameter(_)
                | E::Domain(_)
                | E::Unsupported(_)
                | E::Construction(_) => 1,
                E::Numerical(_) | E::BestEffort { .. } | E::Precision { .. } => 3,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
