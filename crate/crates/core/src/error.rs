use std::path::PathBuf;

use thiserror::Error;

/// Problems found while parsing or validating a run configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },

    #[error("line {line}: invalid value for `{key}`: {reason}")]
    InvalidValue {
        line: usize,
        key: String,
        reason: String,
    },

    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

impl ConfigError {
    pub(crate) fn invalid(key: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasurementError {
    #[error("evolution is not unitary (max deviation of U^dagger U from identity: {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("initial populations must be nonnegative and sum to 1, got ({0}, {1})")]
    BadPopulations(f64, f64),

    #[error("quality factor must be positive and finite, got {0}")]
    BadQualityFactor(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermoError {
    #[error("occupation probability of the final state underflowed to {probability:e} at step {step}")]
    ZeroProbability { step: usize, probability: f64 },

    #[error("occupation table has {table} points but the trajectory needs {needed}")]
    GridMismatch { table: usize, needed: usize },

    #[error("fluctuation-theorem estimator needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

/// Top-level error used by the ensemble runner and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Measurement(#[from] MeasurementError),

    #[error(transparent)]
    Thermo(#[from] ThermoError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
