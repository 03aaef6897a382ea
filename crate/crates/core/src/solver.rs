//! Sequential probabilistic ODE solver over B-spline coefficients, and a
//! grid posterior over equation parameters.
//!
//! The state is one coefficient Gaussian per solution component. By default
//! the coefficients follow a random walk: `ϑ_0` and the derivative
//! coefficients `Dϑ` are iid `N(0, σ²)`. An iid prior on `ϑ` itself pins only
//! `ϑ_0` through `u(0)` and drags the rest of the solution toward zero.
//!
//! The prior is conditioned exactly on `u(0) = u0` and on `u_t(0) = f(0, u0)`.
//! Then, at each grid point `t_i` in ascending order, the solver
//!
//! 1. forms the marginal of `u(t_i)` and draws from it (or takes its mean),
//! 2. evaluates the field `f_i = f(t_i, u_i, θ)`,
//! 3. conditions every component on the derivative functional
//!    `u_t(t_i) = f_i` with nugget `ε²`.
//!
//! Conditioning is a single linear row against each coefficient Gaussian,
//! so nothing is re-assembled between steps.

use alloc::vec;
use alloc::vec::Vec;

use crate::bspline::{DerivativeOperator, KnotVector};
use crate::convergence::GridSpec;
use crate::error::{Error, Result};
use crate::gaussian::{self, CoefficientPrior, GaussianVector, LinearObservation, PriorStructure};
use crate::linalg::{self, Matrix};

/// Right-hand side `f(t, u, θ)` of `u_t = f(t, u, θ)`.
pub trait VectorField {
    fn eval(&self, t: f64, u: &[f64], theta: &[f64]) -> Vec<f64>;
}

impl<F> VectorField for F
where
    F: Fn(f64, &[f64], &[f64]) -> Vec<f64>,
{
    fn eval(&self, t: f64, u: &[f64], theta: &[f64]) -> Vec<f64> {
        self(t, u, theta)
    }
}

/// Initial value problem `u_t = f(t, u, θ)`, `u(0) = u0` on `[0, L]`.
#[derive(Debug, Clone)]
pub struct OdeProblem<F> {
    pub field: F,
    pub theta: Vec<f64>,
    pub u0: Vec<f64>,
    pub domain_length: f64,
}

impl<F: VectorField> OdeProblem<F> {
    pub fn new(field: F, theta: Vec<f64>, u0: Vec<f64>, domain_length: f64) -> Result<Self> {
        if u0.is_empty() {
            return Err(Error::InvalidConfig("state dimension must be at least 1"));
        }
        if !(domain_length > 0.0) || !domain_length.is_finite() {
            return Err(Error::InvalidDomain(domain_length));
        }
        Ok(Self { field, theta, u0, domain_length })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.u0.len()
    }
}

/// How `u(t_i)` is chosen before each field evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// One seeded draw from the current marginal of `u(t_i)`.
    Sample,
    /// The current posterior mean; fully deterministic.
    Mean,
}

/// Default order (cubic splines).
pub const DEFAULT_ORDER: usize = 4;
/// Default coefficient prior variance `σ²`.
pub const DEFAULT_PRIOR_SCALE: f64 = 10.0;
/// Default nugget relative to the prior variance: `ε² = 1e-8 σ²`.
pub const DEFAULT_RELATIVE_NUGGET: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub grid: GridSpec,
    /// Number of basis functions `J`; `None` means `N + q − 1`.
    pub basis_count: Option<usize>,
    pub order: usize,
    pub prior_scale: f64,
    pub prior_structure: PriorStructure,
    pub nugget: f64,
    pub mode: SolveMode,
    pub seed: u64,
    /// Trajectory draws taken from the final posterior.
    pub draws: usize,
}

impl SolverConfig {
    /// Defaults: `q = 4`, `σ² = 10`, `ε² = 1e-8 σ²`, sample mode, seed 0,
    /// `J = N + q − 1`, no draws.
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            basis_count: None,
            order: DEFAULT_ORDER,
            prior_scale: DEFAULT_PRIOR_SCALE,
            prior_structure: PriorStructure::Integrated,
            nugget: DEFAULT_RELATIVE_NUGGET * DEFAULT_PRIOR_SCALE,
            mode: SolveMode::Sample,
            seed: 0,
            draws: 0,
        }
    }

    /// Grid size `N`.
    pub fn n(&self) -> usize {
        self.grid.len()
    }

    /// Resolved basis count `J`.
    pub fn resolved_basis_count(&self) -> usize {
        self.basis_count.unwrap_or(self.n() + self.order - 1)
    }

    /// `λ ≡ 1 / J`.
    pub fn length_scale(&self) -> f64 {
        1.0 / self.resolved_basis_count() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() < 2 {
            return Err(Error::InvalidConfig("grid size N must be at least 2"));
        }
        if self.order < 2 {
            return Err(Error::InvalidConfig("spline order q must be at least 2"));
        }
        if self.resolved_basis_count() < self.order {
            return Err(Error::InvalidBasis { count: self.resolved_basis_count(), order: self.order });
        }
        if !(self.prior_scale > 0.0) || !self.prior_scale.is_finite() {
            return Err(Error::InvalidConfig("prior scale must be positive and finite"));
        }
        if !(self.nugget >= 0.0) || !self.nugget.is_finite() {
            return Err(Error::InvalidConfig("nugget must be finite and non-negative"));
        }
        Ok(())
    }

    /// Basis for the solve: uniform knots on uniform grids, otherwise knots
    /// placed along the grid so every knot span receives interrogations.
    pub fn knots(&self, domain_length: f64) -> Result<KnotVector> {
        let pts = self.grid.points();
        if self.grid.c_target() == 1.0 || pts.last() != Some(&domain_length) {
            KnotVector::clamped_uniform(domain_length, self.resolved_basis_count(), self.order)
        } else {
            KnotVector::clamped_on_grid(pts, self.resolved_basis_count(), self.order)
        }
    }
}

/// Seed-stream tags for [`derive_seed`].
pub mod streams {
    pub const STEP: u64 = 1;
    pub const DRAWS: u64 = 2;
    pub const SIMULATION: u64 = 3;
}

/// Sub-seed for `(stream, index)`: SplitMix64 finalizer applied to
/// `seed ^ stream·φ`, then again after adding `index`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(index))
}

/// Coefficient Gaussians per component plus the basis they live in.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub knots: KnotVector,
    pub derivative: DerivativeOperator,
    pub coeffs: Vec<GaussianVector>,
}

impl SolverState {
    /// Mean and variance of each component of `u(t)`.
    pub fn marginal(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let b = self.knots.eval_basis(t)?;
        let mut means = Vec::with_capacity(self.coeffs.len());
        let mut vars = Vec::with_capacity(self.coeffs.len());
        for g in &self.coeffs {
            let (m, v) = g.project(&b)?;
            means.push(m);
            vars.push(v.max(0.0));
        }
        Ok((means, vars))
    }

    fn derivative_row(&self, t: f64) -> Result<Vec<f64>> {
        let b = self.derivative.target.eval_basis(t)?;
        self.derivative.matrix.tr_matvec(&b)
    }
}

/// Coefficient prior from `config` per component, conditioned exactly on `u(0) = u0`.
pub fn init_prior<F: VectorField>(problem: &OdeProblem<F>, config: &SolverConfig) -> Result<SolverState> {
    config.validate()?;
    let knots = config.knots(problem.domain_length)?;
    let derivative = DerivativeOperator::new(&knots)?;
    let prior = CoefficientPrior::with_structure(config.prior_scale, config.prior_structure)?.gaussian_for(&knots)?;
    let b0 = knots.eval_basis(0.0)?;
    let coeffs = problem
        .u0
        .iter()
        .map(|&u0| gaussian::condition(&prior, &LinearObservation::scalar(b0.clone(), u0, 0.0)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(SolverState { knots, derivative, coeffs })
}

/// One interrogation at `t`: choose `u(t)`, evaluate the field, condition on
/// `u_t(t) = f`.
pub fn step<F: VectorField>(
    state: &SolverState,
    t: f64,
    problem: &OdeProblem<F>,
    config: &SolverConfig,
    seed: u64,
) -> Result<SolverState> {
    let (means, vars) = state.marginal(t)?;
    let u = match config.mode {
        SolveMode::Mean => means,
        SolveMode::Sample => {
            let g = GaussianVector { mean: means, cov: Matrix::diagonal(&vars) };
            gaussian::sample(&g, seed)?
        }
    };
    let f = problem.field.eval(t, &u, &problem.theta);
    if f.len() != state.coeffs.len() {
        return Err(Error::Dimension { expected: state.coeffs.len(), found: f.len() });
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::FieldEvaluation { t, u });
    }
    let row = state.derivative_row(t)?;
    let coeffs = state
        .coeffs
        .iter()
        .zip(&f)
        .map(|(g, &fk)| gaussian::condition(g, &LinearObservation::scalar(row.clone(), fk, config.nugget)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(SolverState { knots: state.knots.clone(), derivative: state.derivative.clone(), coeffs })
}

/// Final coefficient posterior of a solve, with its grid and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbSolution {
    pub coeff_posterior: Vec<GaussianVector>,
    pub knots: KnotVector,
    pub grid: GridSpec,
    /// Each draw is an `N × d` matrix of trajectory values at the grid.
    pub draws: Vec<Matrix>,
    pub mode_used: SolveMode,
    pub seed_used: u64,
}

impl ProbSolution {
    pub fn dim(&self) -> usize {
        self.coeff_posterior.len()
    }

    pub fn mean_at(&self, t: f64) -> Result<Vec<f64>> {
        let b = self.knots.eval_basis(t)?;
        Ok(self.coeff_posterior.iter().map(|g| linalg::dot(&b, &g.mean)).collect())
    }

    pub fn sd_at(&self, t: f64) -> Result<Vec<f64>> {
        let b = self.knots.eval_basis(t)?;
        self.coeff_posterior
            .iter()
            .map(|g| g.project(&b).map(|(_, v)| libm::sqrt(v.max(0.0))))
            .collect()
    }

    /// Joint Gaussian of `u` at `times`, stacked time-major:
    /// index `i·d + k` is component `k` at `times[i]`.
    pub fn state_at(&self, times: &[f64]) -> Result<GaussianVector> {
        let d = self.dim();
        let rows = times.iter().map(|&t| self.knots.eval_basis(t)).collect::<Result<Vec<_>>>()?;
        let n = times.len() * d;
        let mut mean = vec![0.0; n];
        let mut cov = Matrix::zeros(n, n);
        for (k, g) in self.coeff_posterior.iter().enumerate() {
            let sb: Vec<Vec<f64>> = rows.iter().map(|b| g.cov.matvec(b)).collect::<Result<_>>()?;
            for (i, bi) in rows.iter().enumerate() {
                mean[i * d + k] = linalg::dot(bi, &g.mean);
                for (j, sbj) in sb.iter().enumerate() {
                    cov[(i * d + k, j * d + k)] = linalg::dot(bi, sbj);
                }
            }
        }
        cov.symmetrize();
        Ok(GaussianVector { mean, cov })
    }

    /// Total posterior coefficient variance (sum of traces).
    pub fn total_variance(&self) -> f64 {
        self.coeff_posterior.iter().map(|g| g.cov.trace()).sum()
    }
}

/// Runs [`init_prior`] then [`step`] at every grid point in ascending order.
/// Step `i` uses seed `derive_seed(seed, STEP, i)`; draws of component `k`
/// use `derive_seed(seed, DRAWS, k)`.
pub fn solve<F: VectorField>(problem: &OdeProblem<F>, config: &SolverConfig) -> Result<ProbSolution> {
    config.validate()?;
    let l = problem.domain_length;
    if config.grid.points().iter().any(|&t| !(t > 0.0 && t <= l)) {
        return Err(Error::OutOfDomain { t: config.grid.domain_length(), lo: 0.0, hi: l });
    }
    let mut state = init_prior(problem, config)?;
    // u(0) is known exactly, so the interrogation at t = 0 is deterministic.
    state = match step(&state, 0.0, problem, config, 0) {
        Err(Error::FieldEvaluation { .. }) => return Err(Error::Diverged { step: 0, t: 0.0 }),
        other => other?,
    };
    for (i, &t) in config.grid.points().iter().enumerate() {
        let seed_i = derive_seed(config.seed, streams::STEP, i as u64);
        state = match step(&state, t, problem, config, seed_i) {
            Err(Error::FieldEvaluation { .. }) => return Err(Error::Diverged { step: i, t }),
            other => other?,
        };
        if state.coeffs.iter().any(|g| g.mean.iter().any(|m| !m.is_finite())) {
            return Err(Error::Diverged { step: i, t });
        }
    }

    let grid = config.grid.clone();
    let d = problem.dim();
    let mut draws = Vec::new();
    if config.draws > 0 {
        let rows = grid.points().iter().map(|&t| state.knots.eval_basis(t)).collect::<Result<Vec<_>>>()?;
        let per_component = state
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, g)| gaussian::sample_many(g, derive_seed(config.seed, streams::DRAWS, k as u64), config.draws))
            .collect::<Result<Vec<_>>>()?;
        // `s` picks the same draw out of every component.
        #[allow(clippy::needless_range_loop)]
        for s in 0..config.draws {
            let traj = Matrix::from_fn(grid.len(), d, |i, k| linalg::dot(&rows[i], &per_component[k][s]));
            draws.push(traj);
        }
    }

    Ok(ProbSolution {
        coeff_posterior: state.coeffs,
        knots: state.knots,
        grid,
        draws,
        mode_used: config.mode,
        seed_used: config.seed,
    })
}

/// Linear observation model `Y = A u(obs_times) + ε`, `ε ~ N(0, noise_var I)`.
/// Columns of `A` index the time-major stacked state (see
/// [`ProbSolution::state_at`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel {
    pub a: Matrix,
    pub obs_times: Vec<f64>,
    pub noise_var: f64,
}

impl ObservationModel {
    pub fn new(a: Matrix, obs_times: Vec<f64>, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0) || !noise_var.is_finite() {
            return Err(Error::InvalidConfig("observation noise variance must be positive"));
        }
        if obs_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidConfig("observation times must be finite and non-negative"));
        }
        if !obs_times.is_empty() && !a.cols().is_multiple_of(obs_times.len()) {
            return Err(Error::Dimension { expected: obs_times.len(), found: a.cols() });
        }
        Ok(Self { a, obs_times, noise_var })
    }

    /// Every component observed directly at every time: `A = I`.
    pub fn direct(obs_times: Vec<f64>, dim: usize, noise_var: f64) -> Result<Self> {
        let n = obs_times.len() * dim;
        Self::new(Matrix::identity(n), obs_times, noise_var)
    }
}

/// `log N(y; A m_u, A S_u Aᵀ + noise_var I)` under the solver posterior.
pub fn marginal_likelihood(sol: &ProbSolution, obs: &ObservationModel, y: &[f64]) -> Result<f64> {
    if y.len() != obs.a.rows() {
        return Err(Error::Dimension { expected: obs.a.rows(), found: y.len() });
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let state = sol.state_at(&obs.obs_times)?;
    if obs.a.cols() != state.dim() {
        return Err(Error::Dimension { expected: state.dim(), found: obs.a.cols() });
    }
    let mut pred = state.linear_map(&obs.a)?;
    for i in 0..pred.dim() {
        pred.cov[(i, i)] += obs.noise_var;
    }
    pred.log_pdf(y)
}

/// Normalized posterior weights over `theta_grid` under a uniform prior.
/// Every candidate is solved with the same `config` (same seed).
/// A candidate whose solve diverges gets zero weight.
pub fn grid_posterior<F, P>(
    family: P,
    theta_grid: &[Vec<f64>],
    obs: &ObservationModel,
    y: &[f64],
    config: &SolverConfig,
) -> Result<Vec<(Vec<f64>, f64)>>
where
    F: VectorField,
    P: Fn(&[f64]) -> Result<OdeProblem<F>>,
{
    if theta_grid.is_empty() {
        return Err(Error::InvalidConfig("parameter grid must be non-empty"));
    }
    let mut logs = Vec::with_capacity(theta_grid.len());
    for theta in theta_grid {
        let problem = family(theta)?;
        let ll = match solve(&problem, config) {
            Ok(sol) => marginal_likelihood(&sol, obs, y)?,
            Err(Error::Diverged { .. }) => f64::NEG_INFINITY,
            Err(e) => return Err(e),
        };
        logs.push(ll);
    }
    let weights = normalize_log_weights(&logs)?;
    Ok(theta_grid.iter().cloned().zip(weights).collect())
}

/// `exp(l_i − max l) / ∑_j exp(l_j − max l)`.
pub fn normalize_log_weights(logs: &[f64]) -> Result<Vec<f64>> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegeneratePosterior);
    }
    let unnorm: Vec<f64> = logs.iter().map(|l| libm::exp(l - max)).collect();
    let total: f64 = unnorm.iter().sum();
    Ok(unnorm.iter().map(|w| w / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn zero_field(_: f64, u: &[f64], _: &[f64]) -> Vec<f64> {
        vec![0.0; u.len()]
    }

    fn config(n: usize, l: f64) -> SolverConfig {
        SolverConfig::new(GridSpec::uniform(n, l).unwrap())
    }

    #[test]
    fn prior_is_pinned_at_zero() {
        for u0 in [0.0, 5.0, -1.25] {
            let p = OdeProblem::new(zero_field, vec![], vec![u0], 1.0).unwrap();
            let state = init_prior(&p, &config(10, 1.0)).unwrap();
            let (m, v) = state.marginal(0.0).unwrap();
            assert_abs_diff_eq!(m[0], u0, epsilon = 1e-10);
            assert!(v[0] <= 1e-10);
            if u0 == 0.0 {
                assert!(state.coeffs[0].mean.iter().all(|x| *x == 0.0));
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut c = config(10, 1.0);
        c.order = 1;
        assert!(c.validate().is_err());
        let mut c = config(10, 1.0);
        c.basis_count = Some(3);
        assert!(matches!(c.validate(), Err(Error::InvalidBasis { .. })));
        let mut c = config(10, 1.0);
        c.nugget = -1.0;
        assert!(c.validate().is_err());
        let c = config(10, 1.0);
        assert_eq!(c.resolved_basis_count(), 13);
        assert_abs_diff_eq!(c.length_scale(), 1.0 / 13.0);
    }

    #[test]
    fn non_finite_field_is_reported() {
        let blowup = |t: f64, u: &[f64], _: &[f64]| if t > 0.5 { vec![f64::NAN; u.len()] } else { vec![1.0; u.len()] };
        let p = OdeProblem::new(blowup, vec![], vec![0.0], 1.0).unwrap();
        let mut c = config(10, 1.0);
        c.mode = SolveMode::Mean;
        let state = init_prior(&p, &c).unwrap();
        assert!(matches!(step(&state, 0.7, &p, &c, 0), Err(Error::FieldEvaluation { .. })));
        assert_eq!(solve(&p, &c).unwrap_err(), Error::Diverged { step: 5, t: 0.6 });
    }

    #[test]
    fn grid_outside_domain_rejected() {
        let p = OdeProblem::new(zero_field, vec![], vec![0.0], 1.0).unwrap();
        assert!(matches!(solve(&p, &config(10, 2.0)), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn log_weights_normalize() {
        let w = normalize_log_weights(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(w, vec![0.25; 4]);
        let w = normalize_log_weights(&[-1000.0, f64::NEG_INFINITY, -1001.0]).unwrap();
        assert_eq!(w[1], 0.0);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_eq!(normalize_log_weights(&[f64::NEG_INFINITY; 2]), Err(Error::DegeneratePosterior));
    }

    #[test]
    fn seeds_differ_across_streams_and_steps() {
        let a = derive_seed(1, streams::STEP, 0);
        assert_ne!(a, derive_seed(1, streams::STEP, 1));
        assert_ne!(a, derive_seed(1, streams::DRAWS, 0));
        assert_ne!(a, derive_seed(2, streams::STEP, 0));
        assert_eq!(a, derive_seed(1, streams::STEP, 0));
    }
}
