//! CLI-level error type and the documented exit-code mapping.

use std::fmt;

/// What went wrong, grouped by the exit code a shell caller sees.
///
/// Exit codes: 0 success, 1 environment/I-O failure, 2 configuration error
/// (including usage errors), 3 input-file format error, 4 numerical failure.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration: unparseable file, unknown/duplicate key, value out
    /// of range, inconsistent parameters. Exit code 2.
    Config(String),
    /// A data input file (time-tag stream, counts JSON) is malformed.
    /// Exit code 3.
    InputFormat(String),
    /// Filesystem trouble reading inputs or writing outputs. Exit code 1.
    Io { context: String, source: std::io::Error },
    /// An error surfaced by the simulation/analysis layer; mapped by kind.
    Core(timebin_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use timebin_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::InputFormat(_) => 3,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                E::BadFormat { .. } | E::UnsortedStream { .. } => 3,
                E::Numerical(_) | E::DegenerateFit(_) => 4,
                // invalid parameters, dimensions, refusals: the caller's
                // configuration built a bad object
                _ => 2,
            },
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::InputFormat(msg) => write!(f, "input format error: {msg}"),
            CliError::Io { context, source } => write!(f, "{context}: {source}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<timebin_core::Error> for CliError {
    fn from(e: timebin_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
