use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("layout error: {0}")]
    Layout(String),

    #[error("composition error: {0}")]
    Composition(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid engine spec: {0}")]
    Spec(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error("no convergence after {cycles} cycles (last residual {residual:e})")]
    Convergence { cycles: usize, residual: f64 },

    #[error("unit eigenvalue is degenerate (subleading magnitude {subleading:.3e})")]
    Degenerate { subleading: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}
