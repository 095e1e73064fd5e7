use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where a formula is defined.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The shifted matrix `(1+s)I - sqrt(s) M` is not positive definite, so the
    /// log-determinant in the test statistic is undefined for this sample.
    #[error("spectral overflow: largest eigenvalue {} reaches the pole at {bound}",
        eigenvalue.map(|e| e.to_string()).unwrap_or_else(|| "(unknown)".into()))]
    SpectralOverflow { eigenvalue: Option<f64>, bound: f64 },

    #[error("function is not finite at eigenvalue {eigenvalue}")]
    NonFinite { eigenvalue: f64 },

    #[error("symmetric eigensolver failed to converge (matrix hash {hash:016x})")]
    Eigensolver { hash: u64 },

    #[error("Chebyshev series not converged at lmax={lmax}: estimated tail {tail:e} > {tolerance:e}")]
    Truncation { lmax: usize, tail: f64, tolerance: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("enumeration over 2^(n*k) sign matrices exceeds capacity: n={n}, k={k} (n*k must be <= 24)")]
    Capacity { n: usize, k: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SpectralOverflow { .. }
                | Error::NonFinite { .. }
                | Error::Eigensolver { .. }
                | Error::Truncation { .. }
                | Error::Quadrature(_)
                | Error::Capacity { .. }
                | Error::Domain(_)
        )
    }
}
