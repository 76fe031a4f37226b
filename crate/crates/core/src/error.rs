use thiserror::Error;

/// Errors raised by the operator algebra, solvers and expansions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("particle {index} is not present in host set {host:?}")]
    IndexOutOfRange { index: usize, host: Vec<usize> },

    #[error("duplicate particle index {0}")]
    DuplicateIndex(usize),

    #[error("particles {subset:?} are not a subset of {host:?}")]
    NotSubset { subset: Vec<usize>, host: Vec<usize> },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("gamma must lie in (0, 1), got {0}")]
    GammaOutOfRange(f64),

    #[error("gamma must be below 1/e for the norm estimate, got {0}")]
    GammaAboveInverseE(f64),

    #[error("requested {requested} particles but only {max} are cached")]
    TooManyParticles { requested: usize, max: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("time {t} is outside the convergence radius t0 = {t0}")]
    OutsideRadius { t: f64, t0: f64 },

    #[error("order {order} exceeds the supported maximum {max}")]
    OrderTooLarge { order: usize, max: usize },

    #[error("quadrature depth {needed} exceeds the configured maximum {max}")]
    DepthExceeded { needed: usize, max: usize },

    #[error("subnormalization {0} violates lambda < 1/e")]
    LambdaTooLarge(f64),

    #[error("grid: {0}")]
    Grid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
