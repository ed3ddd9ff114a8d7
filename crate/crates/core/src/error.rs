use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure did not reach its target accuracy.
    #[error("numerical error: {what} (achieved {achieved:.3e})")]
    Numerical { what: String, achieved: f64 },

    /// Two fields or grids that must agree do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Fixed-point iteration stopped contracting.
    #[error("fixed-point iteration diverged after {} iterations", .ratios.len())]
    Divergence { ratios: Vec<f64>, norms: Vec<f64> },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
