//! B-spline Gaussian priors for probabilistic ODE solving.
//!
//! The unknown solution is modelled as `u(t) = ∑_j ϑ_j B_{j,q}(t)` with
//! Gaussian coefficients. The derivative is again a B-spline
//! series whose coefficients are a weighted first difference of `ϑ`, so `u`
//! and `u_t` are jointly Gaussian with banded covariances. On top of that:
//!
//! - [`solver`]: sequential model interrogation producing a Gaussian
//!   posterior over `u` that carries discretization uncertainty, and a grid
//!   posterior over equation parameters from noisy linear observations;
//! - [`tensor`]: the same construction for space-time fields using
//!   tensor-product splines;
//! - [`convergence`]: quasi-uniform grids and log-log rate estimation.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bspline;
pub mod convergence;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod solver;
pub mod tensor;

pub use crate::bspline::{CoefficientVector, DerivativeOperator, KnotVector};
pub use crate::convergence::{
    estimate_rate, estimate_rate_with, fit_rate, make_quasi_uniform_grid, quasi_uniformity_constant, GridSpec,
    RateReport, RateRow,
};
pub use crate::error::{Error, Result};
pub use crate::gaussian::{
    bandwidth_of, condition, joint_state_gaussian, sample, sample_many, CoefficientPrior, GaussianVector,
    LinearObservation, PriorStructure,
};
pub use crate::linalg::Matrix;
pub use crate::solver::{
    derive_seed, grid_posterior, init_prior, marginal_likelihood, solve, step, ObservationModel, OdeProblem,
    ProbSolution, SolveMode, SolverConfig, SolverState, VectorField,
};
pub use crate::tensor::{
    joint_field_gaussian, mixed_partial_operator, tensor_eval, MixedPartial, TensorBasis, TensorCoefficients,
};
