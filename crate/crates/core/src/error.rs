use std::path::PathBuf;

use thiserror::Error;

use crate::unrolled::IterateTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity exceeded: {what} needs {requested} entries, cap is {cap}")]
    Capacity {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A non-finite value appeared in an iterate. `step` is 1-based.
    #[error("iteration diverged at step {step}: {context}")]
    Divergence { step: usize, context: String },

    #[error("{method} did not converge after {iterations} iterations (relative residual {residual:e})")]
    ConvergenceFailure {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// An unrolled run broke down; the trace holds every completed step.
    #[error("unrolled run diverged at outer step {step}")]
    RunDiverged {
        step: usize,
        trace: Box<IterateTrace>,
    },

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("config error at line {line}, key `{key}`: {message}")]
    Config {
        line: usize,
        key: String,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
