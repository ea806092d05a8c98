use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("spin must be a positive half-integer, got {0}")]
    InvalidSpin(f64),

    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("dimension {found} is not allowed here (expected {expected})")]
    InvalidDimension { expected: &'static str, found: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("trace is {0} instead of 1")]
    TraceNotOne(f64),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("populations must be non-negative and sum to one: {0:?}")]
    InvalidPopulations(Vec<f64>),

    #[error("level index {index} out of range for dimension {dim}")]
    LevelOutOfRange { index: usize, dim: usize },

    #[error("quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("regulator {scheme} cannot evaluate a half-line transform at relative frequency {frequency}")]
    UnsupportedRegulator { scheme: &'static str, frequency: f64 },

    #[error("regulator scale a0 = {a0} must be smaller than the switching width T = {switching}")]
    RegulatorScale { a0: f64, switching: f64 },

    #[error("frequency must be nonzero")]
    ZeroFrequency,

    #[error("no cached response integral for key ({omega1}, {omega2}, {halfline})")]
    MissingKey { omega1: f64, omega2: f64, halfline: String },
}
