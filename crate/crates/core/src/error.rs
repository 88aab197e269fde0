use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Encoded data whose parts disagree with each other (payload length vs.
    /// popcount, offsets out of range, stored zero codes, ...).
    #[error("malformed encoding: {0}")]
    Structural(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("invalid accelerator config: {}", .0.join("; "))]
    Config(Vec<String>),

    /// A scheduling invariant of the cycle model did not hold. Always a bug.
    #[error("simulation integrity violated: {0}")]
    Integrity(String),

    #[error("parse error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn parse(line: Option<usize>, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Maps a TOML decode failure to a parse error carrying its 1-based line.
    pub fn toml(src: &str, e: &toml::de::Error) -> Self {
        let line = e.span().map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1);
        Error::parse(line, e.message().to_string())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
