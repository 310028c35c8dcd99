use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("unsupported basis kind: {0}")]
    UnsupportedKind(String),

    #[error("projection grid too coarse: {points} points, need at least {required}")]
    GridTooCoarse { points: usize, required: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("mode {index} out of range (basis holds {len} modes)")]
    ModeOutOfRange { index: usize, len: usize },

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("quadrature did not converge on [{a}, {b}] after {panels} panels")]
    QuadratureNonConvergence { a: f64, b: f64, panels: usize },

    #[error("s = {s} lies outside the penalty domain (0, {upper})")]
    OutsideDomain { s: f64, upper: f64 },

    #[error("all {0} grid evaluations were non-finite")]
    EmptyScan(usize),

    #[error("invalid config: field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("failed to parse config {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{module}: {source}")]
    Context {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tags an error with the module it surfaced from.
    pub fn in_module(self, module: &'static str) -> Self {
        match self {
            e @ Error::Context { .. } => e,
            e => Error::Context {
                module,
                source: Box::new(e),
            },
        }
    }
}
