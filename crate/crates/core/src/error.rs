use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("observable is not centred: |c_0| = {c0:e} exceeds tolerance {tol:e}; recentre G before expanding")]
    NotCentred { c0: f64, tol: f64 },

    #[error("accuracy target not met: {0}")]
    Accuracy(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("solution diverged at step {step} (|x| = {norm:e}){}", seed.map(|s| format!(" on the path with seed {s}")).unwrap_or_default())]
    Divergence { step: usize, norm: f64, seed: Option<u64> },

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("config error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Argument(msg()))
    }
}
