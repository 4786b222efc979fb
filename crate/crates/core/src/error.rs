use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Argument outside the domain of a special function or constant.
    #[error("domain error: {0}")]
    Domain(String),
    /// Problem parameters violate a precondition (n > 2s, n > 6s, λ < λ₁, ...).
    #[error("parameter error: {0}")]
    Parameter(String),
    /// Grid or solver configuration is invalid.
    #[error("configuration error: {0}")]
    Config(String),
    /// A quadrature failed to reach the requested tolerance.
    #[error("tolerance not reached: {what} (achieved residual {residual:e})")]
    Tolerance { what: String, residual: f64 },
    /// Assembly of the discrete forms failed.
    #[error("assembly error: {0}")]
    Assembly(String),
    /// An iterative method stagnated or diverged.
    #[error("convergence error: {what} after {iterations} iterations (residual {residual:e})")]
    Convergence {
        what: String,
        iterations: usize,
        residual: f64,
    },
    /// Nehari or nodal-Nehari projection failed.
    #[error("projection error: {0}")]
    Projection(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($variant:ident, $($fmt:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($fmt)*)))
    };
}
pub(crate) use bail;
