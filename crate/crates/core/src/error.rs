use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, parameters or configuration do not satisfy an operation's preconditions.
    #[error("configuration error: {0}")]
    Config(String),

    /// The smallest singular value fell below the relative rank tolerance.
    #[error("rank deficient input: sigma_min = {sigma_min:e}, tolerance = {tol:e}")]
    RankDeficient { sigma_min: f64, tol: f64 },

    /// An iterative kernel failed to converge or diverged.
    #[error("numeric error in {routine} at iteration {iteration}: {detail}")]
    Numeric {
        routine: &'static str,
        iteration: usize,
        detail: String,
    },

    /// An iterate left the feasibility band of the manifold.
    #[error("feasibility violation {violation:e} exceeds {limit:e} at iteration {iteration}")]
    Infeasible {
        iteration: usize,
        violation: f64,
        limit: f64,
    },

    /// The objective does not provide the requested capability.
    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
