use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("laguerre parameter must exceed -1, got {0}")]
    LaguerreAlpha(String),
    #[error("basis expansion failed: residual of degree {0} remains")]
    BasisExpansion(usize),
    #[error("eigenfunction mismatch: {0}")]
    Mismatch(String),
    #[error("derivative order {order} unavailable (max {max})")]
    DerivativeOrder { order: usize, max: usize },
    #[error("weak delta residual {residual:e} above tolerance {tol:e}")]
    WeakDelta { residual: f64, tol: f64 },
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("grid exhausted: {0}")]
    GridExhausted(String),
    #[error("missing dependency: {0}")]
    MissingLevel(String),
    #[error("fit not identifiable: {0}")]
    Fit(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
