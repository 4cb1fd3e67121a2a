use std::path::{Path, PathBuf};

use diagraph_core::detectsim::NoiseError;
use diagraph_core::formats::FormatError;
use diagraph_core::metrics::MetricsError;
use diagraph_core::synthesizer::SynthError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configs or inputs that parse but are unusable. Exit code 1.
    #[error("{message}")]
    Validation { message: String, details: Vec<String> },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    kind: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<&'a Path>,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    details: &'a [String],
    exit_code: i32,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError::Validation {
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
        move |source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, message: impl ToString) -> Self {
        CliError::Parse {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 1,
            CliError::Parse { .. } | CliError::Io { .. } => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation { .. } => "validation",
            CliError::Parse { .. } => "parse",
            CliError::Io { .. } => "io",
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        let (path, details): (Option<&Path>, &[String]) = match self {
            CliError::Validation { details, .. } => (None, details),
            CliError::Parse { path, .. } | CliError::Io { path, .. } => (Some(path), &[]),
        };
        let body = ErrorBody {
            kind: self.kind(),
            message: self.to_string(),
            path,
            details,
            exit_code: self.exit_code(),
        };
        serde_json::json!({ "error": body }).to_string()
    }

    pub(crate) fn from_format(path: &Path, e: FormatError) -> Self {
        match e {
            FormatError::Io { path, source } => CliError::Io { path, source },
            FormatError::Parse { .. } => CliError::parse(path, e),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Io { path, source } => CliError::Io { path, source },
            other => CliError::validation(other.to_string()),
        }
    }
}

impl From<NoiseError> for CliError {
    fn from(e: NoiseError) -> Self {
        CliError::validation(format!("invalid noise configuration: {e}"))
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::validation(e.to_string())
    }
}
