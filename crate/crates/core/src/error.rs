use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid lag {tau} for series of length {n}")]
    InvalidLag { tau: usize, n: usize },

    #[error("matrix is not Hermitian (defect {defect:.3e} exceeds {tolerance:.3e})")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("pole of 1/(1 + g x) on the support of the measure (g = {g})")]
    SingularIntegral { g: String },

    #[error("fixed-point solver did not converge at z = {z} after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        z: String,
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    #[error("converged to a root outside the admissible set at z = {z}: {reason}")]
    SpuriousRoot { z: String, reason: String },

    #[error("near-singular integrand at z = {z}: {what} = {value:.3e}")]
    NearSingular { z: String, what: String, value: f64 },

    #[error("contours too close: |{what}| = {value:.3e}; enlarge contour separation")]
    CoincidenceLimit { what: String, value: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("at grid point x = {x}: {source}")]
    AtGridPoint { x: f64, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
