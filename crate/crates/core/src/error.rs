use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty region")]
    EmptyRegion,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("frequency is resonant at x = {witness:?}")]
    ResonantFrequency { witness: Vec<i64> },
    #[error("spectral weight retains no modes")]
    NoModes,
    #[error("majorant too large: the tail integral of log M(t)/t^2 diverges")]
    MajorantTooLarge,
    #[error("value {value} outside the representable range ({range})")]
    OutOfRange { value: f64, range: String },
    #[error("epsilon = {epsilon} violates the hypothesis epsilon <= {bound}")]
    EpsilonHypothesis { epsilon: f64, bound: f64 },
    #[error("no k0 found within {budget} levels")]
    K0NotFound { budget: u32 },
    #[error("observation covariance is not positive definite (jitter = {jitter:e}); use a positive jitter")]
    IllConditioned { jitter: f64 },
    #[error("box has {sites} sites, above the limit of {limit}")]
    BoxTooLarge { sites: usize, limit: usize },
    #[error("E = {energy} resonant with spectrum (condition estimate {condition:e})")]
    ResonantEnergy { energy: f64, condition: f64 },
    #[error("no eigenvalue matches the selector")]
    NoEigenvalue,
    #[error("scale ladder stalls at L = {scale}: floor(L^gamma) <= L")]
    LadderStalls { scale: u64 },
    #[error("scale ladder exceeds the window; maximum feasible k_max is {max_feasible:?}")]
    WindowTooSmall { max_feasible: Option<usize> },
}

pub type Result<T> = std::result::Result<T, Error>;
