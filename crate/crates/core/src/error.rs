use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the library.
///
/// Variants fall into two groups that the command-line front end maps to
/// different exit codes: configuration problems (`Config`, `InvalidInput`,
/// `Unsupported`, `Precondition`) and numerical failures (everything else).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("singular metric at x = {point:?}")]
    SingularMetric { point: Vec<f64> },

    #[error("geodesic integration failed: {0}")]
    GeodesicFailure(String),

    #[error("ODE integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },

    #[error("z = {z} is within {estimate:.3e} of the spectrum")]
    NearSpectrum { z: Complex64, estimate: f64 },

    #[error("iterative solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("argument {alpha} is within {distance:.1e} of a pole")]
    PoleProximity { alpha: Complex64, distance: f64 },

    #[error("contour construction failed: {0}")]
    ContourFailure(String),

    #[error("quadrature truncation error: integrand magnitude {bound:.3e} at the cutoff")]
    TruncationError { bound: f64 },

    #[error("radial set classification failed: {0}")]
    ClassificationFailure(String),
}

impl Error {
    /// True for errors caused by the caller's configuration rather than by
    /// the numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidInput(_) | Error::Unsupported(_) | Error::Precondition(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
