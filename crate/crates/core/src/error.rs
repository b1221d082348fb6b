use std::io;

use thiserror::Error;

use crate::alip::AlipError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Alip(#[from] AlipError),

    #[error("unknown terrain kind `{0}`")]
    UnknownTerrain(String),

    #[error("terrain level {0} outside [0, 1]")]
    InvalidTerrainLevel(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config line {line}: `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },

    #[error("environment {index}: {message}")]
    Env { index: usize, message: String },

    #[error("missing expert labels for regularized variant")]
    MissingLabels,

    #[error("{0}")]
    Eval(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
