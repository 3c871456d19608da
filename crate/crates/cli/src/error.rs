use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

use crate::config::EXPERIMENT_NAMES;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("unknown experiment `{0}`; valid experiments: {names}", names = EXPERIMENT_NAMES.join(", "))]
    UnknownExperiment(String),

    #[error(transparent)]
    Model(#[from] coop_limits::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn config(key: &str, reason: impl Into<String>) -> Self {
        CliError::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            CliError::Config { key, .. } => Some(key),
            CliError::UnknownExperiment(_) => Some("experiment"),
            CliError::Model(coop_limits::Error::InvalidParameter { name, .. }) => Some(name),
            _ => None,
        }
    }

    /// 2 for configuration and precondition problems, 3 when a numerical
    /// method failed to converge, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::UnknownExperiment(_) => 2,
            CliError::Model(e) if e.is_non_convergence() => 3,
            CliError::Model(
                coop_limits::Error::InvalidParameter { .. }
                | coop_limits::Error::Precondition(_)
                | coop_limits::Error::NoFixedPoint { .. }
                | coop_limits::Error::CurveTooShort { .. }
                | coop_limits::Error::SpectrumNotNormalized { .. }
                | coop_limits::Error::DegenerateGeometry(_),
            ) => 2,
            _ => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::UnknownExperiment(_) => "unknown-experiment",
            CliError::Model(e) if e.is_non_convergence() => "non-convergence",
            CliError::Model(_) => "model",
            CliError::Io { .. } => "io",
            CliError::Output(_) => "output",
        }
    }

    /// One-line JSON for stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let Some(k) = self.key() {
            v["key"] = json!(k);
        }
        if let CliError::UnknownExperiment(_) = self {
            v["valid"] = json!(EXPERIMENT_NAMES);
        }
        v
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
