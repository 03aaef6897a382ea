use alloc::vec::Vec;

/// Errors raised by the spline, Gaussian, solver and grid routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid basis: {count} basis functions cannot carry order {order} (need count >= order >= 1)")]
    InvalidBasis { count: usize, order: usize },

    #[error("invalid domain length {0}: must be positive and finite")]
    InvalidDomain(f64),

    #[error("invalid knot vector: {0}")]
    InvalidKnots(&'static str),

    #[error("point {t} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("derivative of order {requested} is undefined for splines of order {order}")]
    DerivativeUndefined { order: usize, requested: usize },

    #[error("evaluation points must be sorted ascending")]
    UnsortedPoints,

    #[error("innovation covariance is singular and the nugget is zero; add a positive nugget")]
    SingularConditioning,

    #[error("covariance is not positive semidefinite (pivot {pivot} after jitter)")]
    NotPsd { pivot: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("vector field returned a non-finite value at t = {t} (u = {u:?})")]
    FieldEvaluation { t: f64, u: Vec<f64> },

    #[error("solver diverged at step {step} (t = {t}): vector field returned a non-finite value")]
    Diverged { step: usize, t: f64 },

    #[error("every candidate has zero likelihood; the grid posterior is degenerate")]
    DegeneratePosterior,

    #[error("invalid quasi-uniformity bound {0}: must be >= 1")]
    InvalidBound(f64),

    #[error("grid has a non-positive increment at index {index}")]
    DegenerateGrid { index: usize },

    #[error("rate undefined: error at N = {n} is {error} (must be positive and finite)")]
    RateUndefined { n: usize, error: f64 },

    #[error("rate fit needs at least 3 strictly increasing grid sizes, got {0}")]
    TooFewPoints(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
