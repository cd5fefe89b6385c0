use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("singular value decomposition failed to converge")]
    ConvergenceFailure,
    #[error("degenerate point: {0}")]
    DegeneratePoint(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("input vector is not sorted nonincreasing and nonnegative")]
    UnsortedInput,
    #[error("singular value blocks too close to separate (gap {gap:.3e}, need {need:.3e})")]
    IllConditionedPartition { gap: f64, need: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("complementarity violated at coordinate {index}: z={z}, y={y}")]
    ComplementarityViolated { index: usize, z: f64, y: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid instance or generator spec: {0}")]
    InvalidSpec(String),
    #[error("infeasibility detected: {0}")]
    InfeasibleDetected(String),
    #[error("dual point is infeasible: {0}")]
    DualInfeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
