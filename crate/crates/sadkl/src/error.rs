use std::io;
use std::path::PathBuf;

use sadkl_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or command-line input.
    #[error("invalid {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{context}: {source}")]
    Core {
        context: &'static str,
        source: CoreError,
    },
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// 1 for validation errors, 2 for I/O errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Parse { .. } => 1,
            CliError::Io { .. } => 2,
            CliError::Core { source, .. } => {
                if is_numerical(source.root()) {
                    3
                } else {
                    1
                }
            }
        }
    }
}

fn is_numerical(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::FitNonConvergence { .. }
            | CoreError::QuadratureNonConvergence { .. }
            | CoreError::DetectionProbabilityTooLow(_)
            | CoreError::Diverged { .. }
            | CoreError::DivergentDensity { .. }
            | CoreError::NegativeScore(_)
    )
}

/// Attaches a short description of the failing step to core errors.
pub trait Context<T> {
    fn context(self, what: &'static str) -> Result<T>;
}

impl<T> Context<T> for std::result::Result<T, CoreError> {
    fn context(self, what: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Core {
            context: what,
            source,
        })
    }
}
