//! Command-line errors and their exit codes.

use thiserror::Error;

use crate::io::LoadError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid flags or configuration; exit code 1.
    #[error("usage error: {0}")]
    Usage(String),

    /// Unreadable or malformed input data; exit code 2.
    #[error("data error: {0}")]
    Data(String),

    /// Failure while computing, including budget and guard violations; exit code 3.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<ustat::Error> for CliError {
    fn from(e: ustat::Error) -> Self {
        use ustat::Error as E;
        match e {
            E::Config(_) => CliError::Usage(e.to_string()),
            E::Domain(_) => CliError::Data(e.to_string()),
            E::Overflow(_)
            | E::Budget(_)
            | E::EmptyDesign
            | E::State(_)
            | E::DegenerateVariance { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(format!("JSON: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(format!("CSV output: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("I/O: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(
            CliError::from(ustat::Error::Config("x".into())).exit_code(),
            1
        );
        assert_eq!(
            CliError::from(ustat::Error::Domain("x".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::from(ustat::Error::Budget("x".into())).exit_code(),
            3
        );
        assert_eq!(CliError::from(ustat::Error::EmptyDesign).exit_code(), 3);
        assert_eq!(
            CliError::from(LoadError::EmptyFile("f".into())).exit_code(),
            2
        );
    }
}
