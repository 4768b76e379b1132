use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("set is empty")]
    EmptySet,

    #[error("set is unbounded in the requested direction")]
    Unbounded,

    #[error("feasible parameter set of row {row} is empty; the model is misspecified")]
    EmptyFeasibleSet { row: usize },

    #[error("optimization problem is infeasible")]
    Infeasible,

    #[error("solver hit its iteration cap ({0})")]
    MaxIter(usize),

    #[error("riccati iteration did not converge after {0} iterations")]
    RiccatiNoConvergence(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid config at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
