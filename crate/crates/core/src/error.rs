use thiserror::Error;

/// Errors raised by the modelling, buddying and uncertainty routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A value or argument violates a domain invariant.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two series (or a series and a window) do not cover the same slots.
    #[error("window mismatch: {0}")]
    WindowMismatch(String),

    /// Configuration values are out of range.
    #[error("invalid config: {0}")]
    Config(String),

    /// A normalizer in a relative score is zero.
    #[error("degenerate normalizer: {0}")]
    DegenerateNormalizer(String),

    /// No candidate profiles exist for a group.
    #[error("empty candidate group: {0}")]
    EmptyGroup(String),

    /// Design matrix of a regression is (numerically) rank deficient.
    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    /// An iterative solver failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A case the routine deliberately does not handle.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Malformed input file content.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad input data rather than configuration or numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::WindowMismatch(_)
                | Error::EmptyGroup(_)
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::Json { .. }
                | Error::Csv { .. }
                | Error::Unsupported(_)
        )
    }
}
