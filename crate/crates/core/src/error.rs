use thiserror::Error;

/// Errors raised by packet, field, quadrature and propagation routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (relative defect {defect:.3e})")]
    NotSymmetric { defect: f64 },

    #[error("matrix is not positive definite (minimal eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("width degenerated: minimal eigenvalue of Im C is {min_eig:.3e} < {floor:.3e}")]
    WidthDegenerate { min_eig: f64, floor: f64 },

    #[error("matrix is singular or too ill-conditioned (condition estimate {cond:.3e})")]
    Singular { cond: f64 },

    #[error("packet is not normalized (norm^2 = {norm_sq:.12})")]
    NotNormalized { norm_sq: f64 },

    #[error("invalid multi-index: {0}")]
    InvalidIndex(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown builtin field `{0}`")]
    UnknownField(String),

    #[error("missing derivative: {0}")]
    MissingDerivative(String),

    #[error("step size underflow at t = {t}: h = {h:.3e}")]
    StepUnderflow { t: f64, h: f64 },

    #[error("monitor violation at t = {t}: {quantity} = {value:.6e} (limit {limit:.6e})")]
    Monitor {
        quantity: String,
        t: f64,
        value: f64,
        limit: f64,
    },

    #[error("box too small: boundary mass {mass:.3e} exceeds {tol:.3e}")]
    BoxTooSmall { mass: f64, tol: f64 },

    #[error("krylov iteration failed: {0}")]
    Krylov(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("grids do not match")]
    GridMismatch,

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
