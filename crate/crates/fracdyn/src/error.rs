use std::path::PathBuf;

use fracdyn_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    /// A run completed but one or more reproduction checks failed.
    pub const CHECKS: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Checks(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                CoreError::OrderDomain(_) | CoreError::Parameter(_) | CoreError::Usage(_) => exit::USAGE,
                CoreError::Dimension(_)
                | CoreError::HistoryLength { .. }
                | CoreError::Index { .. }
                | CoreError::InsufficientExcitation { .. }
                | CoreError::InconsistentData { .. } => exit::DATA,
                CoreError::Diverged { .. } | CoreError::DatasetDiverged { .. } | CoreError::IllPosed { .. } => {
                    exit::NUMERICAL
                }
            },
            CliError::Config(_) => exit::USAGE,
            CliError::Io { .. } | CliError::Format { .. } => exit::DATA,
            CliError::Checks(_) => exit::CHECKS,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_classes_are_distinct() {
        let usage = CliError::from(CoreError::Usage("x".into())).exit_code();
        let data = CliError::from(CoreError::InsufficientExcitation { component: 0 }).exit_code();
        let num = CliError::from(CoreError::IllPosed { condition: 1e20 }).exit_code();
        assert_eq!((usage, data, num), (exit::USAGE, exit::DATA, exit::NUMERICAL));
        assert_eq!(CliError::Config("bad".into()).exit_code(), exit::USAGE);
    }
}
