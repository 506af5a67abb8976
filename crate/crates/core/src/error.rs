use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("step size {dt:e} exceeds the stability/resolution limit {limit:e}")]
    StepSize { dt: f64, limit: f64 },

    #[error("resolvent (sI - M) is singular at omega = {omega:e} (|det| = {det:e})")]
    SingularResolvent { omega: f64, det: f64 },

    #[error("TLS-induced damping of mode {mode} is non-positive: S(w) - S(-w) = {difference:e}")]
    NonPositiveDamping { mode: usize, difference: f64 },

    #[error("unphysical covariance matrix at t = {time:e}: min symplectic eigenvalue {min_nu}")]
    Unphysical { time: f64, min_nu: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("Hilbert space dimension {dim} exceeds the memory ceiling {ceiling}")]
    MemoryCeiling { dim: usize, ceiling: usize },

    #[error("adaptive integrator failed at t = {time:e}: {reason}")]
    Tolerance { time: f64, reason: String },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("observable is not Hermitian (deviation {deviation:e})")]
    NonHermitian { deviation: f64 },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
