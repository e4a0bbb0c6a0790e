use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or experiment plan. The message names the field.
    #[error("config error: {0}")]
    Config(String),
    /// Input outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A factorization or estimator failed numerically.
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A UE whose estimate or precoder normalizer vanished.
    #[error("degenerate UE {ue}: {what}")]
    DegenerateUe { ue: usize, what: String },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 2 for configuration problems,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Io { .. } => 2,
            Error::Numerical(_) | Error::DegenerateUe { .. } | Error::DegenerateGeometry(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
