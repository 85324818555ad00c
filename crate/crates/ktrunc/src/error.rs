use std::path::PathBuf;

use ktrunc_core::ErrorKind;

/// Exit status for configuration and input errors.
pub const EXIT_CONFIG: i32 = 1;
/// Exit status when irreducibility or drift fails.
pub const EXIT_ASSUMPTION: i32 = 2;
/// Exit status when a numerical guard trips.
pub const EXIT_NUMERICAL: i32 = 3;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] ktrunc_core::Error),

    #[error("drift verification failed: {0}")]
    Verification(String),

    #[error("sweep column {column} is not monotone: {detail}")]
    NotMonotone { column: String, detail: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Read { .. } | CliError::Write { .. } => EXIT_CONFIG,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Input => EXIT_CONFIG,
                ErrorKind::Assumption => EXIT_ASSUMPTION,
                ErrorKind::Numerical => EXIT_NUMERICAL,
            },
            CliError::Verification(_) => EXIT_ASSUMPTION,
            CliError::NotMonotone { .. } => EXIT_NUMERICAL,
        }
    }
}

pub fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}
