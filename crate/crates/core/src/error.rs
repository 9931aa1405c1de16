use thiserror::Error;

/// Errors raised by every module of the crate.
///
/// Messages are surfaced verbatim by the CLI, so they name the offending
/// object (edge, node, parameter, line) wherever one exists.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("disconnected graph")]
    Disconnected,

    #[error("zero-degree node {0}")]
    ZeroDegree(usize),

    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {residual:.3e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("{0}")]
    Domain(String),

    #[error("{msg} at line {line}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
