use std::fmt;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or out-of-domain configuration.
    Config(String),
    /// A library computation rejected its inputs or failed to converge.
    Numeric(lpmkl_core::Error),
    /// A post-hoc check in `verify` or `sandwich` failed. Outputs are still written.
    Assertion(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Assertion(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(e) => write!(f, "numeric error: {e}"),
            CliError::Assertion(m) => write!(f, "assertion failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<lpmkl_core::Error> for CliError {
    fn from(e: lpmkl_core::Error) -> Self {
        CliError::Numeric(e)
    }
}

/// A config error tied to a field path.
pub fn field(path: &str, reason: impl fmt::Display) -> CliError {
    CliError::Config(format!("at `{path}`: {reason}"))
}
