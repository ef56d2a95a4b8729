//! Crate-wide error type and the exit-code mapping used by the CLI.

use std::path::PathBuf;
use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode the library reports.
///
/// The CLI maps these onto process exit codes via [`Error::exit_code`]:
/// configuration problems exit 2, missing upstream artifacts exit 3, and
/// everything data- or state-related exits 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix or layer dimensions do not line up.
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    /// An operation ran against an object in the wrong state, e.g. an
    /// optimizer step before any gradients were computed.
    #[error("invalid state: {0}")]
    State(String),

    /// A computation produced NaN or infinity.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A document could not be parsed; `location` names the line or the
    /// offending field path.
    #[error("parse error at {location}: {detail}")]
    Parse { location: String, detail: String },

    /// Input data violated a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A sampling request could not be satisfied by the given pool.
    #[error("sampling error: {0}")]
    Sampling(String),

    /// A vocabulary ended up with zero entries.
    #[error("vocabulary is empty after loading or restriction")]
    EmptyVocabulary,

    /// An application produced a graph with no nodes.
    #[error("app {app_id} yields an empty graph (no vocabulary API is reachable)")]
    EmptyGraph { app_id: String },

    /// The run configuration is unusable.
    #[error("config error: {0}")]
    Config(String),

    /// A pipeline stage needs an artifact that an earlier command produces.
    #[error("missing artifact {artifact}: run `{producer}` first")]
    Dependency { artifact: PathBuf, producer: &'static str },

    /// A persisted document carries an unexpected format, version, or hash.
    #[error("format error: {0}")]
    Format(String),

    /// Filesystem failure, annotated with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Helper for wrapping `std::io::Error` with the path that caused it.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for this error: 2 config, 3 dependency, 4 data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Dependency { .. } => 3,
            _ => 4,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_cli_contract() {
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(
            Error::Dependency { artifact: "m.json".into(), producer: "train-vgae" }.exit_code(),
            3
        );
        assert_eq!(Error::Validation("x".into()).exit_code(), 4);
        assert_eq!(Error::EmptyVocabulary.exit_code(), 4);
    }

    #[test]
    fn dependency_error_names_the_producing_command() {
        let err = Error::Dependency { artifact: "out/snn_model.json".into(), producer: "train-snn" };
        let msg = err.to_string();
        assert!(msg.contains("train-snn"), "message should name the producer: {msg}");
    }
}
