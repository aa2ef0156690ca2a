use std::fmt;

use mdelm_core::Error;

/// Command failure with its exit code: 2 for bad input or configuration,
/// 1 for failures while running.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    /// Wraps a core error, prefixing `context`.
    pub fn context(context: impl fmt::Display, e: Error) -> Self {
        let msg = format!("{context}: {e}");
        if is_validation(&e) {
            CliError::Validation(msg)
        } else {
            CliError::Runtime(msg)
        }
    }
}

fn is_validation(e: &Error) -> bool {
    match e {
        Error::InvalidParameter(_)
        | Error::UnknownQuantile(_)
        | Error::LabelOutOfRange { .. }
        | Error::EmptyClass(_)
        | Error::DuplicateVariable(_)
        | Error::TypeMismatch { .. }
        | Error::MalformedCell { .. }
        | Error::MissingColumn { .. }
        | Error::Csv(_)
        | Error::Json(_) => true,
        Error::Io(io) => io.kind() == std::io::ErrorKind::NotFound,
        Error::ModelFailed { source, .. } => is_validation(source),
        _ => false,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let validation = is_validation(&e);
        let msg = e.to_string();
        if validation {
            CliError::Validation(msg)
        } else {
            CliError::Runtime(msg)
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}
