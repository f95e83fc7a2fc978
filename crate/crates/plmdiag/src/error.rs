use std::path::PathBuf;

use crate::dataset::DatasetError;

/// Failures of a CLI command, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Dataset(#[from] DatasetError),

    #[error(transparent)]
    Core(#[from] plmdiag_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A hand-written input file (config, scenario) failed to parse.
    #[error("{}: {reason}", path.display())]
    Parse { path: PathBuf, reason: String },

    /// A machine-written artifact (manifest, model, trace) is unreadable.
    #[error("{}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error("{0}")]
    Runtime(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for input the user can fix by editing flags or config, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        use plmdiag_core::Error as E;
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Parse { .. } => EXIT_VALIDATION,
            Error::Core(
                E::InvalidParameter { .. }
                | E::Domain { .. }
                | E::Geometry { .. }
                | E::Nyquist { .. }
                | E::InsufficientSamples { .. }
                | E::ClassImbalance { .. },
            ) => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        }
    }
}
