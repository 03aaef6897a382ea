//! Quasi-uniform grids and empirical convergence-rate estimation.
//!
//! A grid `0 = t_0 < t_1 < … < t_N = L` is quasi-uniform with constant `C`
//! when `max_i Δ_i / min_i Δ_i ≤ C`. On such grids the largest increment is
//! of order `1/N`, so a first-order method should show a log-log error slope
//! near `-1` against `N`.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::solver::{solve, OdeProblem, SolveMode, SolverConfig, VectorField};

/// Sorted interrogation points in `(0, L]` together with the bound they were
/// generated under.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    points: Vec<f64>,
    c_target: f64,
}

impl GridSpec {
    /// Validates a strictly increasing grid in `(0, ∞)` and checks it against
    /// `c_target`.
    pub fn new(points: Vec<f64>, c_target: f64) -> Result<Self> {
        if !(c_target >= 1.0) {
            return Err(Error::InvalidBound(c_target));
        }
        let c = quasi_uniformity_constant(&points)?;
        if c > c_target * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig("grid violates its quasi-uniformity bound"));
        }
        Ok(Self { points, c_target })
    }

    /// `t_i = i L / N`, `i = 1..=N`.
    pub fn uniform(n: usize, domain_length: f64) -> Result<Self> {
        make_quasi_uniform_grid(n, domain_length, 1.0, 0)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn c_target(&self) -> f64 {
        self.c_target
    }

    /// Right endpoint `t_N`.
    pub fn domain_length(&self) -> f64 {
        self.points.last().copied().unwrap_or(0.0)
    }

    /// Largest increment `h`, with `t_0 = 0`.
    pub fn max_increment(&self) -> f64 {
        increments(&self.points).fold(0.0, f64::max)
    }

    pub fn quasi_uniformity(&self) -> f64 {
        // Validated at construction.
        quasi_uniformity_constant(&self.points).unwrap_or(f64::INFINITY)
    }
}

fn increments(points: &[f64]) -> impl Iterator<Item = f64> + '_ {
    core::iter::once(0.0).chain(points.iter().copied()).zip(points.iter().copied()).map(|(a, b)| b - a)
}

/// `h / min_i (t_i − t_{i−1})` with `t_0 = 0`.
pub fn quasi_uniformity_constant(points: &[f64]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::DegenerateGrid { index: 0 });
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for (index, d) in increments(points).enumerate() {
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::DegenerateGrid { index });
        }
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Ok(hi / lo)
}

/// `N` points on `(0, L]`: uniform increments `L/N`, each scaled by a factor
/// drawn log-uniformly from `[1/√C, √C]`, then renormalized to sum to `L`.
/// The last point is exactly `L`; `C = 1` gives the exact uniform grid.
pub fn make_quasi_uniform_grid(n: usize, domain_length: f64, c: f64, seed: u64) -> Result<GridSpec> {
    if !(c >= 1.0) || !c.is_finite() {
        return Err(Error::InvalidBound(c));
    }
    if n < 2 {
        return Err(Error::InvalidConfig("grid needs at least two points"));
    }
    if !(domain_length > 0.0) || !domain_length.is_finite() {
        return Err(Error::InvalidDomain(domain_length));
    }
    let points: Vec<f64> = if c == 1.0 {
        (1..=n).map(|i| i as f64 * domain_length / n as f64).collect()
    } else {
        let half_log = 0.5 * libm::log(c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let factors: Vec<f64> = (0..n).map(|_| libm::exp(rng.random_range(-half_log..=half_log))).collect();
        let total: f64 = factors.iter().sum();
        let mut acc = 0.0;
        let mut pts: Vec<f64> = factors
            .iter()
            .map(|f| {
                acc += f;
                domain_length * acc / total
            })
            .collect();
        pts[n - 1] = domain_length;
        pts
    };
    // Rounding can push the uniform grid's constant a few ulps above 1; the
    // target stays exactly 1 so callers can recognize uniform grids.
    let c_actual = quasi_uniformity_constant(&points)?;
    let c_target = if c == 1.0 { 1.0 } else { c.max(c_actual) };
    Ok(GridSpec { points, c_target })
}

/// Grid seed for size `n` in a rate study: `base_seed XOR n`.
#[inline]
pub fn per_grid_seed(base_seed: u64, n: usize) -> u64 {
    base_seed ^ n as u64
}

/// One row of a rate study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub h: f64,
    pub c_actual: f64,
    pub max_error: f64,
}

/// Errors against `N` and the least-squares fit `ln e = intercept + slope ln N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
}

impl RateReport {
    pub fn ns(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.n).collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.max_error).collect()
    }
}

/// Ordinary least squares on `(ln N, ln error)`.
pub fn fit_rate(rows: Vec<RateRow>) -> Result<RateReport> {
    if rows.len() < 3 {
        return Err(Error::TooFewPoints(rows.len()));
    }
    if rows.windows(2).any(|w| w[1].n <= w[0].n) || rows[0].n == 0 {
        return Err(Error::TooFewPoints(rows.len()));
    }
    if let Some(bad) = rows.iter().find(|r| !(r.max_error > 0.0) || !r.max_error.is_finite()) {
        return Err(Error::RateUndefined { n: bad.n, error: bad.max_error });
    }
    let xs: Vec<f64> = rows.iter().map(|r| libm::log(r.n as f64)).collect();
    let ys: Vec<f64> = rows.iter().map(|r| libm::log(r.max_error)).collect();
    let k = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / k;
    let ybar = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| {
        let r = y - intercept - slope * x;
        r * r
    }).sum();
    Ok(RateReport { rows, slope, intercept, residual: libm::sqrt(sse / k) })
}

/// Runs `measure(n)` for each grid size and fits the rate. `measure` returns
/// the grid used and the max error on it; this is the seam for synthetic
/// error sequences.
pub fn estimate_rate_with<M>(ns: &[usize], mut measure: M) -> Result<RateReport>
where
    M: FnMut(usize) -> Result<(GridSpec, f64)>,
{
    if ns.len() < 3 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::TooFewPoints(ns.len()));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let (grid, max_error) = measure(n)?;
        if !(max_error > 0.0) || !max_error.is_finite() {
            return Err(Error::RateUndefined { n, error: max_error });
        }
        rows.push(RateRow { n, h: grid.max_increment(), c_actual: grid.quasi_uniformity(), max_error });
    }
    fit_rate(rows)
}

/// Solver convergence study. For each `N`: a grid with the base config's
/// quasi-uniformity target and seed `base_seed XOR N`, a mean-mode solve,
/// and the max abs error of the posterior mean against `analytic` over grid
/// points and state dimensions.
pub fn estimate_rate<F, A>(
    problem: &OdeProblem<F>,
    analytic: A,
    ns: &[usize],
    base_config: &SolverConfig,
) -> Result<RateReport>
where
    F: VectorField,
    A: Fn(f64) -> Vec<f64>,
{
    let c = base_config.grid.c_target();
    estimate_rate_with(ns, |n| {
        let grid = make_quasi_uniform_grid(n, problem.domain_length, c, per_grid_seed(base_config.seed, n))?;
        let config = SolverConfig { grid: grid.clone(), mode: SolveMode::Mean, draws: 0, ..base_config.clone() };
        let sol = solve(problem, &config)?;
        let mut err = 0.0_f64;
        for &t in grid.points() {
            let mean = sol.mean_at(t)?;
            for (m, e) in mean.iter().zip(analytic(t)) {
                err = err.max((m - e).abs());
            }
        }
        Ok((grid, err))
    })
}
