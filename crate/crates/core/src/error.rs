use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alpha must lie in the open interval (0, 1), got {0}")]
    AlphaOutOfRange(f64),

    #[error("cell level {level} exceeds the blow-up prefix length {prefix_len}")]
    LevelMismatch { level: usize, prefix_len: usize },

    #[error("point is the indeterminacy point [1, -delta, 0]")]
    Indeterminacy,

    #[error("infinite product for b did not settle after {steps} factors (last factor {last})")]
    ProductDivergence { steps: usize, last: f64 },

    #[error("window [{lo}, {hi}) must be a nonempty subset of (-inf, 0]")]
    InvalidWindow { lo: f64, hi: f64 },

    #[error("root set covers |lambda| <= {covered} but {required} is needed")]
    InsufficientRootWindow { covered: f64, required: f64 },

    #[error("inverse iteration did not converge for eigenvalue {value} (residual {residual:e})")]
    InverseIteration { value: f64, residual: f64 },

    #[error("base piece defect {defect:e} exceeds tolerance {tol:e}")]
    RootNotConverged { defect: f64, tol: f64 },

    #[error("lambda = {0} is not classified in the support")]
    NotInSupport(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
