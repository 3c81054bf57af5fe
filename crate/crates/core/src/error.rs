use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mixed coefficient representations: {0} vs {1}")]
    KindMismatch(&'static str, &'static str),
    #[error("grid windows differ: {0:?} vs {1:?}")]
    WindowMismatch(Vec<i64>, Vec<i64>),
    #[error("shift by {amount} on axis {axis} is not a multiple of the spacing {spacing}")]
    NonLatticeShift { axis: usize, amount: String, spacing: f64 },
    #[error("site {0:?} is outside the window on an open axis")]
    OutOfWindow(Vec<i64>),
    #[error("operation requires an exponential-sum coefficient")]
    NotSymbolic,
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("grade mismatch: expected {expected}, got {got}")]
    GradeMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular matrix at site {site:?}")]
    Singular { site: Vec<i64> },
    #[error("no reciprocal in the coefficient class")]
    NoReciprocal,
    #[error("form is not closed: |d w| = {residual:e} exceeds {tolerance:e}")]
    NotClosed { residual: f64, tolerance: f64 },
    #[error("nonzero periods on axis {axis}: max |period| = {max_period:e}")]
    PeriodObstruction { axis: usize, max_period: f64, periods: Vec<f64> },
    #[error("Newton iteration failed at site {site:?}, residual {residual:e}")]
    NewtonDiverged { site: Vec<i64>, residual: f64 },
    #[error("overflow guard: |u_k - u_k+1| = {gap} at site {site}")]
    Overflow { site: usize, gap: f64 },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("profile is not linear in the coordinates")]
    NotLinear,
    #[error("hbar mismatch: {0} vs {1}")]
    HbarMismatch(f64, f64),
    #[error("reciprocal check failed: |f g - 1| = {0:e}")]
    NotReciprocal(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
