use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("integration blew up at t = {time}")]
    IntegrationBlowup { time: f64 },
    #[error("window quadrature needs at least 3 sub-step states, got {states}")]
    InsufficientResolution { states: usize },
    #[error("matrix is not symmetric positive semidefinite")]
    NotSymmetricPsd,
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error(
        "regression is not excited (smallest singular value {smallest_singular_value:e}); \
         use more samples or better-spread initial states and inputs"
    )]
    ExcitationInsufficient { smallest_singular_value: f64 },
    #[error("{samples} samples cannot determine {unknowns} unknowns")]
    InsufficientData { samples: usize, unknowns: usize },
    #[error("data set was collected for a different problem: {0}")]
    StaleData(String),
    #[error("Lyapunov operator is singular")]
    SingularLyapunov,
    #[error("Riccati iteration diverged; gamma is likely below the achievable attenuation level")]
    GammaTooSmall,
}
