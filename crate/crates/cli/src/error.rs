//! Command-line error type: every failure is categorized, serialized as a
//! machine-readable JSON object on stderr, and mapped to a stable exit code.

use serde::Serialize;

/// Failure category, mapped one-to-one onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Bad flags, malformed config, or invalid input data (exit 2).
    Input,
    /// Filesystem or stream failure (exit 3).
    Io,
    /// Numeric or convergence failure during fitting (exit 4).
    Numeric,
}

#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    /// Field- or row-level messages when the failure has several causes.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Input,
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Io,
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Numeric,
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn with_details(mut self, details: Vec<String>) -> Self {
        self.details = details;
        self
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Input => 2,
            ErrorKind::Io => 3,
            ErrorKind::Numeric => 4,
        }
    }

    /// The stderr representation: `{"error": {...}}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({ "error": self }))
            .expect("error serialization cannot fail")
    }
}

impl core::fmt::Display for CliError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

/// Convenience for IO failures carrying the path.
pub fn io_err(path: &std::path::Path, err: &std::io::Error) -> CliError {
    CliError::io(format!("{}: {err}", path.display()))
}
