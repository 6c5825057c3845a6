use thiserror::Error;

/// Errors raised by model evaluation, discretization and the scattering drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported derivative order `{order}` for {family}")]
    UnsupportedOrder { family: String, order: String },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("convergence failure: {0}")]
    Convergence(String),

    #[error("boundary mass {mass:.3e} exceeds the limit at t = {time}")]
    BoundaryBreach { time: f64, mass: f64 },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

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

    /// True for failures that a sweep records as data instead of aborting on.
    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::Convergence(_) | Error::Numerical(_) | Error::BoundaryBreach { .. })
    }
}
