use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid environment spec: {0}")]
    Spec(String),

    #[error("solver did not converge after {iterations} iterations (last residual {last_residual:e})")]
    NotConverged {
        iterations: usize,
        last_residual: f64,
        residual_history: Vec<f64>,
    },

    #[error("policy does not reach a terminal state with probability 1")]
    NonEpisodic,

    #[error("episode finished; reset the stepper before stepping again")]
    EpisodeFinished,

    #[error("empty batch")]
    EmptyBatch,

    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,

    #[error("episode does not end with a terminal transition")]
    UnterminatedEpisode,

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
