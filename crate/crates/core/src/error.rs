use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("field kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: [usize; 3],
        found: [usize; 3],
    },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value at node (t={0}, i={1}, j={2})", node[0], node[1], node[2])]
    NonFinite { node: [usize; 3] },

    #[error("regime mismatch: {0}")]
    Regime(String),

    #[error("time step {dt} exceeds T/4 = {limit}")]
    TimeStepTooLarge { dt: f64, limit: f64 },

    #[error("linear solve broke down at time step {step} (pivot row {row})")]
    SolveBreakdown { step: usize, row: usize },

    #[error("f·ũ = {value:e} is not positive at node (t={0}, i={1}, j={2})", node[0], node[1], node[2])]
    NonPositiveDenominator { value: f64, node: [usize; 3] },

    #[error("weight overflow: s·φ = {value:e} > 700 at node (t={0}, i={1}, j={2})", node[0], node[1], node[2])]
    WeightOverflow { value: f64, node: [usize; 3] },

    #[error("function does not vanish on the boundary: max |z| = {max:e} > tolerance {tol:e}")]
    BoundaryNotVanishing { max: f64, tol: f64 },

    #[error("quadrature inconsistency: {0}")]
    Quadrature(String),

    #[error("sign audit failed: {0}")]
    SignAudit(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
