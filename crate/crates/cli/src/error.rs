use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use reqcast_core::Error as CoreError;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration.
    Usage(String),
    /// Input that could not be parsed or processed.
    Data(String),
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    /// Attach the file being processed to a library error.
    pub fn from_core(err: CoreError, path: &Path) -> Self {
        match err {
            CoreError::Io(source) => CliError::Io { path: path.to_path_buf(), source },
            CoreError::MissingColumn(_) => CliError::Usage(format!("{}: {err}", path.display())),
            e if e.is_usage() => CliError::Usage(e.to_string()),
            e => CliError::Data(format!("{}: {e}", path.display())),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Io(source) => CliError::Io { path: PathBuf::new(), source },
            CoreError::MissingColumn(_) => CliError::Usage(err.to_string()),
            e if e.is_usage() => CliError::Usage(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Io { path, source } if path.as_os_str().is_empty() => write!(f, "i/o error: {source}"),
            CliError::Io { path, source } => write!(f, "i/o error: {}: {source}", path.display()),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
