use num_complex::Complex64;
use thiserror::Error;

/// Errors raised across the disc toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid size: {0}")]
    InvalidGrid(String),

    #[error("point {0} lies outside the closed unit disc")]
    OutsideDisc(Complex64),

    #[error("maps live on different grids or have different dimensions")]
    Mismatch,

    #[error("J + J_st is singular at {point:?}")]
    SingularStructure { point: Vec<Complex64> },

    #[error("unknown structure `{0}`")]
    UnknownStructure(String),

    #[error("bad structure parameters: {0}")]
    StructureParams(String),

    #[error("pullback Jacobian is singular on the sampled range (det changes sign near {point:?})")]
    SingularPullback { point: Vec<Complex64> },

    #[error("Beltrami field too large: sup |A| = {sup_norm} >= 1")]
    BeltramiTooLarge { sup_norm: f64 },

    #[error("evaluation at {point:?} leaves the configured box of radius {radius}")]
    OutsideBox { point: Vec<Complex64>, radius: f64 },

    #[error("complement dictionary exhausted: spanned {found} of {needed} cokernel directions")]
    DictionaryExhausted { found: usize, needed: usize },

    #[error("operator has no nonlinear part; build it from a Beltrami field")]
    NoNonlinearPart,

    #[error("linear solve failed after {iterations} iterations (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("Newton did not converge in {iterations} iterations (last residual {last_residual:e})")]
    MaxIterations { iterations: usize, last_residual: f64 },

    #[error("Newton iterate left the trust ball: distance {distance:e} > {radius:e} (last residual {last_residual:e})")]
    TrustBallExit {
        distance: f64,
        radius: f64,
        last_residual: f64,
    },

    #[error("Newton line search stalled (last residual {last_residual:e})")]
    LineSearch { last_residual: f64 },

    #[error("function is not holomorphic: d-bar residual {residual:e} exceeds {tol:e}")]
    NotHolomorphic { residual: f64, tol: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
