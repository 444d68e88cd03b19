use std::path::Path;

use thiserror::Error;

/// Failure of a pipeline command, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation.
    #[error("usage: {0}")]
    Usage(String),
    /// Missing or malformed input, or an invalid configuration.
    #[error("{0}")]
    Data(String),
    /// Training divergence or another numeric failure.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// `--fail-on-damage` was set and damage was found.
    #[error("damage detected in region(s) {0}")]
    DamageFound(String),
}

impl CliError {
    /// Process exit code: 1 usage, 2 data/config, 3 numeric, 4 damage found.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::DamageFound(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }

    pub(crate) fn in_file(path: &Path, err: gwkae_core::Error) -> Self {
        let inner = CliError::from(err);
        match inner {
            CliError::Data(msg) => CliError::Data(format!("{}: {msg}", path.display())),
            other => other,
        }
    }
}

impl From<gwkae_core::Error> for CliError {
    fn from(e: gwkae_core::Error) -> Self {
        use gwkae_core::Error as E;
        match e {
            E::Usage(_) => CliError::Usage(e.to_string()),
            E::Training(_) | E::Degenerate(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Result alias of the command layer.
pub type Result<T, E = CliError> = std::result::Result<T, E>;
