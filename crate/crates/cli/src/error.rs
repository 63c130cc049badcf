use std::path::Path;

/// Failure of a CLI operation, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed or unknown configuration keys.
    #[error("config error: {0}")]
    Config(String),
    /// A well-formed configuration that violates a physical requirement.
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    MissingArtifacts(String),
    #[error("{failed} of {total} checks failed")]
    CheckFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) | CliError::Io { .. } | CliError::MissingArtifacts(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::CheckFailed { .. } => 4,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            context: path.display().to_string(),
            source,
        }
    }
}

impl From<gsqg::Error> for CliError {
    fn from(e: gsqg::Error) -> Self {
        use gsqg::Error as E;
        match e {
            E::NearCollapse { .. } | E::CflViolation { .. } | E::NumericalBlowup { .. } => {
                CliError::Numerical(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
