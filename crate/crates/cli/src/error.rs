use std::fmt;

/// Failure of a CLI run, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad or incomplete configuration. Nothing has been computed yet.
    Config(String),
    /// A numerical routine failed while running `operation`.
    Numerical { operation: &'static str, source: splineprob_core::Error },
    /// Reading inputs or writing results failed.
    Io(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numerical { operation, source } => write!(f, "numerical failure in {operation}: {source}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Attaches the operation name to a core error.
pub trait NumericContext<T> {
    fn during(self, operation: &'static str) -> Result<T, CliError>;
}

impl<T> NumericContext<T> for splineprob_core::Result<T> {
    fn during(self, operation: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Numerical { operation, source })
    }
}
