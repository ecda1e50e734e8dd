use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures that end the process. The variant decides the exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid input; exit 2.
    #[error("{0}")]
    Input(String),
    /// The inputs are valid but the mathematics degenerates; exit 3.
    #[error("{0}")]
    Degenerate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Degenerate(_) => 3,
        }
    }
}

impl From<Located> for CliError {
    fn from(e: Located) -> Self {
        CliError::Input(e.to_string())
    }
}

/// An input error pinned to a file and, where known, a line and field.
#[derive(Debug)]
pub struct Located {
    pub file: PathBuf,
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl Located {
    pub fn new(file: &Path, message: impl Into<String>) -> Self {
        Self {
            file: file.to_path_buf(),
            line: None,
            field: None,
            message: message.into(),
        }
    }

    pub fn line(mut self, line: Option<usize>) -> Self {
        self.line = line;
        self
    }

    pub fn field(mut self, field: impl Into<String>) -> Self {
        self.field = Some(field.into());
        self
    }
}

impl fmt::Display for Located {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file.display())?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, ": field `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}
