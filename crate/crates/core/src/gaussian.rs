//! Finite-dimensional Gaussian algebra: the joint law of `(u, u_t)` under a
//! Gaussian coefficient prior, conditioning on linear observations, and
//! seeded sampling.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bspline::{DerivativeOperator, KnotVector};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Relative eigenvalue threshold of the pseudo-inverse used when the nugget
/// is zero.
pub const PINV_THRESHOLD: f64 = 1e-12;

/// Mean and covariance of a multivariate normal.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianVector {
    pub mean: Vec<f64>,
    pub cov: Matrix,
}

impl GaussianVector {
    /// Checks shape and symmetry (to `1e-12` relative to the largest entry).
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        if !cov.is_square() || cov.rows() != mean.len() {
            return Err(Error::Dimension { expected: mean.len(), found: cov.rows() });
        }
        let tol = 1e-12 * cov.max_abs().max(1.0);
        for i in 0..cov.rows() {
            for j in (i + 1)..cov.cols() {
                if (cov[(i, j)] - cov[(j, i)]).abs() > tol {
                    return Err(Error::NotPsd { pivot: cov[(i, j)] - cov[(j, i)] });
                }
            }
        }
        Ok(Self { mean, cov })
    }

    pub fn zero_mean(cov: Matrix) -> Result<Self> {
        let n = cov.rows();
        Self::new(alloc::vec![0.0; n], cov)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.cov.diag()
    }

    /// Law of `A x`.
    pub fn linear_map(&self, a: &Matrix) -> Result<GaussianVector> {
        let mean = a.matvec(&self.mean)?;
        let mut cov = a.matmul(&self.cov)?.matmul_transposed(a)?;
        cov.symmetrize();
        Ok(GaussianVector { mean, cov })
    }

    /// Mean and variance of the scalar `w · x`.
    pub fn project(&self, w: &[f64]) -> Result<(f64, f64)> {
        let sw = self.cov.matvec(w)?;
        Ok((linalg::dot(w, &self.mean), linalg::dot(w, &sw)))
    }

    /// Verifies positive semidefiniteness up to `1e-10` of the trace scale.
    pub fn check_psd(&self) -> Result<()> {
        let (w, _) = linalg::symmetric_eigen(&self.cov)?;
        let scale = self.cov.diag().iter().map(|d| d.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        match w.iter().copied().fold(f64::INFINITY, f64::min) {
            m if m < -1e-10 * scale => Err(Error::NotPsd { pivot: m }),
            _ => Ok(()),
        }
    }

    /// Log density at `x`. Requires a nondegenerate covariance.
    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: x.len() });
        }
        if self.dim() == 0 {
            return Ok(0.0);
        }
        let l = linalg::cholesky_jittered(&self.cov)?;
        let mut log_det = 0.0;
        for i in 0..self.dim() {
            let p = l[(i, i)];
            if p <= 0.0 {
                return Err(Error::NotPsd { pivot: p });
            }
            log_det += 2.0 * libm::log(p);
        }
        let r: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let z = linalg::solve_lower(&l, &r);
        let quad = linalg::dot(&z, &z);
        let n = self.dim() as f64;
        Ok(-0.5 * (n * libm::log(2.0 * core::f64::consts::PI) + log_det + quad))
    }
}

/// Observation `y = H x + e` with `e ~ N(0, nugget · I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObservation {
    pub h: Matrix,
    pub y: Vec<f64>,
    pub nugget: f64,
}

impl LinearObservation {
    pub fn new(h: Matrix, y: Vec<f64>, nugget: f64) -> Result<Self> {
        if h.rows() == 0 {
            return Err(Error::InvalidConfig("an observation needs at least one row"));
        }
        if h.rows() != y.len() {
            return Err(Error::Dimension { expected: h.rows(), found: y.len() });
        }
        if !(nugget >= 0.0) || !nugget.is_finite() {
            return Err(Error::InvalidConfig("nugget must be finite and non-negative"));
        }
        Ok(Self { h, y, nugget })
    }

    /// A single scalar functional `w · x = y`.
    pub fn scalar(w: Vec<f64>, y: f64, nugget: f64) -> Result<Self> {
        let n = w.len();
        Self::new(Matrix::from_row_major(1, n, w)?, alloc::vec![y], nugget)
    }
}

/// Correlation structure of the coefficient prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorStructure {
    /// `ϑ ~ N(0, σ² I)`. Covariances of `u` and `u_t` are banded.
    Independent,
    /// `ϑ_0 ~ N(0, σ²)` and the derivative coefficients `Dϑ ~ N(0, σ² I)`
    /// independently, so `ϑ` is a random walk and `u` is the integral of a
    /// spline with independent coefficients. Only `u_t` stays banded.
    Integrated,
}

/// Zero-mean Gaussian prior on the spline coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientPrior {
    scale: f64,
    structure: PriorStructure,
}

impl CoefficientPrior {
    /// Independent `N(0, σ²)` coefficients.
    pub fn new(scale: f64) -> Result<Self> {
        Self::with_structure(scale, PriorStructure::Independent)
    }

    pub fn with_structure(scale: f64, structure: PriorStructure) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidConfig("prior scale must be positive and finite"));
        }
        Ok(Self { scale, structure })
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    pub fn structure(&self) -> PriorStructure {
        self.structure
    }

    /// `N(0, σ² I_J)`, the independent prior for `J` coefficients.
    pub fn gaussian(&self, basis_count: usize) -> GaussianVector {
        GaussianVector {
            mean: alloc::vec![0.0; basis_count],
            cov: Matrix::identity(basis_count).scaled(self.scale),
        }
    }

    /// The coefficient Gaussian for the basis `kv` under this structure.
    pub fn gaussian_for(&self, kv: &KnotVector) -> Result<GaussianVector> {
        let jn = kv.basis_count();
        match self.structure {
            PriorStructure::Independent => Ok(self.gaussian(jn)),
            PriorStructure::Integrated => {
                if kv.order() < 2 {
                    return Err(Error::DerivativeUndefined { order: kv.order(), requested: 1 });
                }
                // ϑ = ϑ_0 1 + S c, S[j][k] = Δ_k / (q - 1) for k < j, so that D S = I.
                let q = kv.order();
                let t = kv.knots();
                let steps: Vec<f64> = (0..jn - 1).map(|k| (t[k + q] - t[k + 1]) / (q - 1) as f64).collect();
                let mut gen = Matrix::zeros(jn, jn);
                for j in 0..jn {
                    gen[(j, 0)] = 1.0;
                    for k in 0..j {
                        gen[(j, k + 1)] = steps[k];
                    }
                }
                let cov = gen.matmul_transposed(&gen)?.scaled(self.scale);
                GaussianVector::zero_mean(cov)
            }
        }
    }
}

fn check_points(kv: &KnotVector, points: &[f64]) -> Result<()> {
    if points.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::UnsortedPoints);
    }
    points.iter().try_for_each(|&t| kv.check_domain(t))
}

/// Rows mapping coefficients to `u` at `u_points` followed by `u_t` at
/// `ut_points`. Derivative rows are `b'(s)^T D` with `b'` the order-`q-1`
/// basis and `D` the derivative operator.
pub fn state_design(kv: &KnotVector, u_points: &[f64], ut_points: &[f64]) -> Result<Matrix> {
    check_points(kv, u_points)?;
    check_points(kv, ut_points)?;
    let jn = kv.basis_count();
    let mut design = Matrix::zeros(u_points.len() + ut_points.len(), jn);
    for (i, &s) in u_points.iter().enumerate() {
        let (first, local) = kv.eval_basis_local(s)?;
        design.row_mut(i)[first..first + local.len()].copy_from_slice(&local);
    }
    if !ut_points.is_empty() {
        let d = DerivativeOperator::new(kv)?;
        for (i, &s) in ut_points.iter().enumerate() {
            let b = d.target.eval_basis(s)?;
            let row = d.matrix.tr_matvec(&b)?;
            design.row_mut(u_points.len() + i).copy_from_slice(&row);
        }
    }
    Ok(design)
}

/// Zero-mean joint Gaussian of `(u(s) for s in u_points, u_t(s') for s' in
/// ut_points)` under `prior`. For the independent prior this is
/// `σ² R Rᵀ` with `R` the stacked design.
pub fn joint_state_gaussian(
    kv: &KnotVector,
    prior: &CoefficientPrior,
    u_points: &[f64],
    ut_points: &[f64],
) -> Result<GaussianVector> {
    if kv.order() < 2 {
        return Err(Error::DerivativeUndefined { order: kv.order(), requested: 1 });
    }
    let design = state_design(kv, u_points, ut_points)?;
    let cov = match prior.structure() {
        PriorStructure::Independent => design.matmul_transposed(&design)?.scaled(prior.scale()),
        PriorStructure::Integrated => {
            let sigma = prior.gaussian_for(kv)?.cov;
            let mut c = design.matmul(&sigma)?.matmul_transposed(&design)?;
            c.symmetrize();
            c
        }
    };
    GaussianVector::zero_mean(cov)
}

/// Posterior of `g` after observing `obs`:
/// mean `μ + ΣHᵀS⁻¹(y − Hμ)`, covariance `Σ − ΣHᵀS⁻¹HΣ`, `S = HΣHᵀ + r²I`.
///
/// With a zero nugget `S⁻¹` is an eigenvalue-thresholded pseudo-inverse.
/// Directions of `S` dropped by the threshold must carry a consistent
/// innovation; otherwise the observation contradicts the prior and
/// [`Error::SingularConditioning`] is returned.
pub fn condition(g: &GaussianVector, obs: &LinearObservation) -> Result<GaussianVector> {
    let n = g.dim();
    if obs.h.cols() != n {
        return Err(Error::Dimension { expected: n, found: obs.h.cols() });
    }
    let m = obs.h.rows();
    // Σ Hᵀ, n × m
    let sht = g.cov.matmul_transposed(&obs.h)?;
    let mut s = obs.h.matmul(&sht)?;
    for i in 0..m {
        s[(i, i)] += obs.nugget;
    }
    s.symmetrize();
    let hmu = obs.h.matvec(&g.mean)?;
    let innovation: Vec<f64> = obs.y.iter().zip(&hmu).map(|(y, p)| y - p).collect();

    let scale = (0..m)
        .map(|i| linalg::dot(obs.h.row(i), obs.h.row(i)))
        .fold(0.0_f64, f64::max)
        * g.cov.diag().iter().fold(0.0_f64, |a, d| a.max(d.abs()));
    let consistency_tol = 1e-8 * innovation.iter().chain(&obs.y).fold(1.0_f64, |a, v| a.max(v.abs()));

    // S⁻¹ applied to the innovation and to (ΣHᵀ)ᵀ.
    let s_inv = if m == 1 {
        let s00 = s[(0, 0)];
        let threshold = PINV_THRESHOLD * s00.max(scale);
        if obs.nugget > 0.0 || s00 > threshold {
            if !(s00 > 0.0) {
                return Err(Error::SingularConditioning);
            }
            Matrix::diagonal(&[1.0 / s00])
        } else if innovation[0].abs() <= consistency_tol {
            Matrix::zeros(1, 1)
        } else {
            return Err(Error::SingularConditioning);
        }
    } else if obs.nugget > 0.0 {
        match linalg::cholesky(&s) {
            Ok(l) if (0..m).all(|i| l[(i, i)] > 0.0) => {
                let mut inv = Matrix::zeros(m, m);
                for k in 0..m {
                    let mut e = alloc::vec![0.0; m];
                    e[k] = 1.0;
                    let z = linalg::solve_lower(&l, &e);
                    // L⁻ᵀ z by back substitution
                    let mut x = alloc::vec![0.0; m];
                    for i in (0..m).rev() {
                        let mut acc = z[i];
                        for j in (i + 1)..m {
                            acc -= l[(j, i)] * x[j];
                        }
                        x[i] = acc / l[(i, i)];
                    }
                    for i in 0..m {
                        inv[(i, k)] = x[i];
                    }
                }
                inv.symmetrize();
                inv
            }
            _ => pseudo_inverse(&s, scale, &innovation, consistency_tol, false)?,
        }
    } else {
        pseudo_inverse(&s, scale, &innovation, consistency_tol, true)?
    };

    // K = ΣHᵀ S⁻¹, n × m
    let gain = sht.matmul(&s_inv)?;
    let delta = gain.matvec(&innovation)?;
    let mean: Vec<f64> = g.mean.iter().zip(&delta).map(|(a, b)| a + b).collect();
    let mut cov = g.cov.sub(&gain.matmul_transposed(&sht)?)?;
    cov.symmetrize();
    Ok(GaussianVector { mean, cov })
}

fn pseudo_inverse(
    s: &Matrix,
    scale: f64,
    innovation: &[f64],
    consistency_tol: f64,
    check_consistency: bool,
) -> Result<Matrix> {
    let m = s.rows();
    let (w, v) = linalg::symmetric_eigen(s)?;
    let wmax = w.iter().copied().fold(0.0_f64, f64::max);
    let threshold = PINV_THRESHOLD * wmax.max(scale);
    let mut inv = Matrix::zeros(m, m);
    for k in 0..m {
        let col: Vec<f64> = (0..m).map(|i| v[(i, k)]).collect();
        if w[k] > threshold {
            for i in 0..m {
                for j in 0..m {
                    inv[(i, j)] += col[i] * col[j] / w[k];
                }
            }
        } else if check_consistency && linalg::dot(&col, innovation).abs() > consistency_tol {
            return Err(Error::SingularConditioning);
        }
    }
    inv.symmetrize();
    Ok(inv)
}

fn normal_stream(seed: u64) -> impl Iterator<Item = f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    core::iter::from_fn(move || Some(StandardNormal.sample(&mut rng)))
}

/// One draw `μ + L z`, `z` standard normal from ChaCha8 seeded with `seed`.
/// `L` is a (semidefinite) Cholesky factor with the jitter ladder fallback.
pub fn sample(g: &GaussianVector, seed: u64) -> Result<Vec<f64>> {
    Ok(sample_many(g, seed, 1)?.pop().unwrap_or_default())
}

/// `count` draws sharing one factorization and one generator stream.
pub fn sample_many(g: &GaussianVector, seed: u64, count: usize) -> Result<Vec<Vec<f64>>> {
    let n = g.dim();
    let l = linalg::cholesky_jittered(&g.cov)?;
    let mut z = normal_stream(seed);
    let mut draws = Vec::with_capacity(count);
    for _ in 0..count {
        let zs: Vec<f64> = (&mut z).take(n).collect();
        let lz = l.matvec(&zs)?;
        draws.push(g.mean.iter().zip(&lz).map(|(m, d)| m + d).collect());
    }
    Ok(draws)
}

pub use crate::linalg::bandwidth_of;
