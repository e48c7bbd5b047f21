use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KflowError {
    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("derivative order must be at least 1 (got {0})")]
    InvalidOrder(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("density is not positive at grid point {point} (value {value})")]
    NonPositiveDensity { point: usize, value: f64 },
    #[error("metric not positive definite at grid point {point} (smallest eigenvalue {eigenvalue})")]
    PositivityViolation { point: usize, eigenvalue: f64 },
    #[error("connection is not symplectic (residual {residual:e})")]
    SymplecticityViolation { residual: f64 },
    #[error("operation not applicable: {0}")]
    NotApplicable(String),
    #[error("symmetry residual {residual:e} exceeds tolerance in {what}")]
    SymmetryViolation { what: String, residual: f64 },
    #[error("invariant violated in {what}: residual {residual:e}")]
    InvariantViolation { what: String, residual: f64 },
    #[error("singular pointwise solve at grid point {point}")]
    SingularSolve { point: usize },
    #[error("tensor rank {0} exceeds the supported maximum of 6")]
    RankOverflow(usize),
    #[error("size guard: {0}")]
    SizeGuard(String),
    #[error("trajectory step rejected: {0}")]
    StepRejected(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for KflowError {
    fn from(e: std::io::Error) -> Self {
        KflowError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KflowError>;
