use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (relative residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("eigendecomposition did not converge")]
    ConvergenceFailure,

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("propagator is not unitary (residual {residual:e})")]
    NonUnitaryPropagator { residual: f64 },

    #[error("system and environment index sets overlap at index {0}")]
    OverlappingPartition(usize),

    #[error("index {0} is covered by neither the system nor the environment")]
    IndexGap(usize),

    #[error("only a single system level is supported here, found {0}")]
    MultiLevelSystemUnsupported(usize),

    #[error("invalid reset specification: {0}")]
    InvalidResetSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time step too large: dt * max|detuning| = {product} exceeds {limit}")]
    StepTooLarge { product: f64, limit: f64 },

    #[error("need at least {required} points, got {found}")]
    TooFewPoints { required: usize, found: usize },

    #[error("grid misfit: {0}")]
    GridMisfit(String),

    #[error("internal identity check failed: {0}")]
    IdentityMismatch(String),
}
