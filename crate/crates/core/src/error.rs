use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("invalid constitutive law: {0}")]
    InvalidLaw(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64, history: Vec<f64> },

    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),

    #[error("field is identically zero")]
    ZeroField,

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("{0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
