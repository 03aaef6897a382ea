//! Clamped knot vectors, B-spline basis evaluation, and the coefficient map
//! taking a spline to its derivative.
//!
//! Indices are zero-based throughout. A knot vector of order `q` with `J`
//! basis functions has `J + q` knots; basis function `j` is supported on
//! `[knots[j], knots[j + q]]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Clamped, non-decreasing knot sequence on `[0, L]` for B-splines of a
/// fixed order (order = degree + 1).
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    order: usize,
    knots: Vec<f64>,
    domain_length: f64,
}

impl KnotVector {
    /// Validates an explicit clamped knot sequence. The domain is `[0, L]`
    /// with `L` taken from the last knot.
    pub fn new(order: usize, knots: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidBasis { count: 0, order });
        }
        if knots.len() < 2 * order {
            return Err(Error::InvalidBasis { count: knots.len().saturating_sub(order), order });
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidKnots("knots must be finite"));
        }
        let l = knots[knots.len() - 1];
        if !(l > 0.0) {
            return Err(Error::InvalidDomain(l));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidKnots("knots must be non-decreasing"));
        }
        let n = knots.len();
        if knots[..order].iter().any(|&k| k != 0.0) || knots[n - order..].iter().any(|&k| k != l) {
            return Err(Error::InvalidKnots("first and last `order` knots must equal 0 and L"));
        }
        let interior = &knots[order..n - order];
        if interior.iter().any(|&k| !(k > 0.0 && k < l)) {
            return Err(Error::InvalidKnots("interior knots must lie strictly inside (0, L)"));
        }
        // Order 1 has no continuity to lose, so simple interior knots are allowed there.
        let max_mult = (order - 1).max(1);
        let mut run = 1;
        for w in interior.windows(2) {
            run = if w[1] == w[0] { run + 1 } else { 1 };
            if run > max_mult {
                return Err(Error::InvalidKnots("interior knot multiplicity must stay below the order"));
            }
        }
        Ok(Self { order, knots, domain_length: l })
    }

    /// Uniform clamped knots: `order` knots at each end and `count - order`
    /// interior knots spaced `L / (count - order + 1)` apart.
    pub fn clamped_uniform(domain_length: f64, count: usize, order: usize) -> Result<Self> {
        if !(domain_length > 0.0) || !domain_length.is_finite() {
            return Err(Error::InvalidDomain(domain_length));
        }
        if order == 0 || count < order {
            return Err(Error::InvalidBasis { count, order });
        }
        let spans = count - order + 1;
        let mut knots = Vec::with_capacity(count + order);
        knots.extend(core::iter::repeat_n(0.0, order));
        for i in 1..spans {
            knots.push(domain_length * i as f64 / spans as f64);
        }
        knots.extend(core::iter::repeat_n(domain_length, order));
        Self::new(order, knots)
    }

    /// Clamped knots adapted to a grid `0 = t_0 < t_1 < … < t_N = L`
    /// (`breakpoints` excludes `t_0`). Interior knot `k` sits at fractional
    /// grid index `k N / (count - order + 1)`, interpolated linearly, so with
    /// `count = N + order - 1` the interior knots are exactly `t_1 … t_{N-1}`.
    pub fn clamped_on_grid(breakpoints: &[f64], count: usize, order: usize) -> Result<Self> {
        let n = breakpoints.len();
        let l = *breakpoints.last().ok_or(Error::InvalidKnots("grid must be non-empty"))?;
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidDomain(l));
        }
        if order == 0 || count < order {
            return Err(Error::InvalidBasis { count, order });
        }
        let at = |i: usize| if i == 0 { 0.0 } else { breakpoints[i - 1] };
        let spans = count - order + 1;
        let mut knots = Vec::with_capacity(count + order);
        knots.extend(core::iter::repeat_n(0.0, order));
        for k in 1..spans {
            let num = k * n;
            let (i, rem) = (num / spans, num % spans);
            let knot = if rem == 0 {
                at(i)
            } else {
                let frac = rem as f64 / spans as f64;
                at(i) + frac * (at(i + 1) - at(i))
            };
            knots.push(knot);
        }
        knots.extend(core::iter::repeat_n(l, order));
        Self::new(order, knots)
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    #[inline]
    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    /// Number of basis functions `J`.
    #[inline]
    pub fn basis_count(&self) -> usize {
        self.knots.len() - self.order
    }

    /// Length scale implied by the basis resolution, `1 / J`.
    pub fn length_scale(&self) -> f64 {
        1.0 / self.basis_count() as f64
    }

    /// Greville abscissae: per-basis averages of the `order - 1` inner knots.
    /// Used as coefficients they reproduce `u(t) = t`.
    pub fn greville(&self) -> Vec<f64> {
        let q = self.order;
        if q == 1 {
            return (0..self.basis_count())
                .map(|j| 0.5 * (self.knots[j] + self.knots[j + 1]))
                .collect();
        }
        (0..self.basis_count())
            .map(|j| self.knots[j + 1..j + q].iter().sum::<f64>() / (q - 1) as f64)
            .collect()
    }

    pub fn check_domain(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t <= self.domain_length {
            Ok(())
        } else {
            Err(Error::OutOfDomain { t, lo: 0.0, hi: self.domain_length })
        }
    }

    /// Index `i` of the knot span `[knots[i], knots[i+1])` containing `t`,
    /// with the last span closed at `L`.
    fn span(&self, t: f64) -> usize {
        let upper = self.basis_count() - 1;
        let i = self.knots.partition_point(|&k| k <= t).saturating_sub(1);
        i.clamp(self.order - 1, upper)
    }

    /// Nonzero basis values at `t`: returns `(first, values)` where
    /// `values[k] = B_{first + k}(t)` for `k < order`.
    pub fn eval_basis_local(&self, t: f64) -> Result<(usize, Vec<f64>)> {
        self.check_domain(t)?;
        let p = self.order - 1;
        let i = self.span(t);
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = t - self.knots[i + 1 - j];
            right[j] = self.knots[i + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        Ok((i - p, n))
    }

    /// All `J` basis values at `t`; at most `order` of them are nonzero.
    pub fn eval_basis(&self, t: f64) -> Result<Vec<f64>> {
        let (first, local) = self.eval_basis_local(t)?;
        let mut out = vec![0.0; self.basis_count()];
        out[first..first + local.len()].copy_from_slice(&local);
        Ok(out)
    }

    /// `∑_j c_j B_j(t)`.
    pub fn eval_spline(&self, coeffs: &[f64], t: f64) -> Result<f64> {
        if coeffs.len() != self.basis_count() {
            return Err(Error::Dimension { expected: self.basis_count(), found: coeffs.len() });
        }
        let (first, local) = self.eval_basis_local(t)?;
        Ok(local.iter().zip(&coeffs[first..]).map(|(b, c)| b * c).sum())
    }

    /// The same knots with the first and last removed: the basis of order
    /// `order - 1` in which derivatives are expressed.
    pub fn reduced(&self) -> Result<KnotVector> {
        if self.order < 2 {
            return Err(Error::DerivativeUndefined { order: self.order, requested: 1 });
        }
        // Dropping the outer knots keeps the clamping; interior multiplicities
        // may now equal the lower order, which is a valid (discontinuous) basis.
        Ok(KnotVector {
            order: self.order - 1,
            knots: self.knots[1..self.knots.len() - 1].to_vec(),
            domain_length: self.domain_length,
        })
    }

    /// Design row of the `r`-th derivative at `t`: the length-`J` vector `w`
    /// with `d^r/dt^r ∑ c_j B_j(t) = w · c`.
    pub fn derivative_row(&self, t: f64, r: usize) -> Result<Vec<f64>> {
        if r == 0 {
            return self.eval_basis(t);
        }
        let chain = DerivativeOperator::chain(self, r)?;
        let b = chain.target.eval_basis(t)?;
        chain.matrix.tr_matvec(&b)
    }
}

/// Coefficients of a spline in a given basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub values: Vec<f64>,
    pub knots: KnotVector,
}

impl CoefficientVector {
    pub fn new(knots: KnotVector, values: Vec<f64>) -> Result<Self> {
        if values.len() != knots.basis_count() {
            return Err(Error::Dimension { expected: knots.basis_count(), found: values.len() });
        }
        Ok(Self { values, knots })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.knots.eval_spline(&self.values, t)
    }

    /// The derivative as a spline of one lower order.
    pub fn derivative(&self) -> Result<CoefficientVector> {
        let op = DerivativeOperator::new(&self.knots)?;
        Ok(CoefficientVector { values: op.apply(&self.values)?, knots: op.target })
    }
}

/// Linear map from order-`q` coefficients to the order-`q-1` coefficients
/// of the derivative: a weighted first difference.
///
/// Row `j` has `-(q-1)/Δ_j` at column `j` and `+(q-1)/Δ_j` at column
/// `j + 1`, with `Δ_j = knots[j + q] - knots[j + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeOperator {
    pub matrix: Matrix,
    pub target: KnotVector,
}

impl DerivativeOperator {
    pub fn new(kv: &KnotVector) -> Result<Self> {
        let q = kv.order();
        if q < 2 {
            return Err(Error::DerivativeUndefined { order: q, requested: 1 });
        }
        let target = kv.reduced()?;
        let jn = kv.basis_count();
        let t = kv.knots();
        let w = (q - 1) as f64;
        let mut matrix = Matrix::zeros(jn - 1, jn);
        for j in 0..jn - 1 {
            let delta = t[j + q] - t[j + 1];
            if !(delta > 0.0) {
                return Err(Error::DerivativeUndefined { order: q, requested: 1 });
            }
            matrix[(j, j)] = -w / delta;
            matrix[(j, j + 1)] = w / delta;
        }
        Ok(Self { matrix, target })
    }

    /// `r`-fold composition: maps order-`q` coefficients to those of the
    /// `r`-th derivative in the order-`q-r` basis. `r = 0` is the identity.
    pub fn chain(kv: &KnotVector, r: usize) -> Result<Self> {
        if r >= kv.order() {
            return Err(Error::DerivativeUndefined { order: kv.order(), requested: r });
        }
        let mut acc = Self { matrix: Matrix::identity(kv.basis_count()), target: kv.clone() };
        for _ in 0..r {
            let step = Self::new(&acc.target)?;
            acc = Self { matrix: step.matrix.matmul(&acc.matrix)?, target: step.target };
        }
        Ok(acc)
    }

    pub fn apply(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.matrix.matvec(coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn clamped_knot_examples() {
        let k = KnotVector::clamped_uniform(1.0, 4, 4).unwrap();
        assert_eq!(k.knots(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let k = KnotVector::clamped_uniform(1.0, 5, 4).unwrap();
        assert_eq!(k.knots(), &[0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 1.0]);
        let k = KnotVector::clamped_uniform(2.0, 6, 2).unwrap();
        let expected = [0.0, 0.0, 0.4, 0.8, 1.2, 1.6, 2.0, 2.0];
        for (a, b) in k.knots().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn clamped_knot_errors() {
        assert!(matches!(KnotVector::clamped_uniform(1.0, 3, 4), Err(Error::InvalidBasis { .. })));
        assert!(matches!(KnotVector::clamped_uniform(0.0, 5, 4), Err(Error::InvalidDomain(_))));
        assert!(matches!(KnotVector::clamped_uniform(-1.0, 5, 4), Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn explicit_knot_validation() {
        assert!(KnotVector::new(2, vec![0.0, 0.0, 0.5, 1.0, 1.0]).is_ok());
        assert!(KnotVector::new(2, vec![0.0, 0.1, 0.5, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(2, vec![0.0, 0.0, 0.6, 0.5, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(3, vec![0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(3, vec![0.0, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 1.0]).is_ok());
        assert!(KnotVector::new(1, vec![0.0, 0.3, 0.6, 1.0]).is_ok());
    }

    #[test]
    fn grid_adapted_knots() {
        let grid = [0.1, 0.3, 0.6, 1.0];
        let k = KnotVector::clamped_on_grid(&grid, 7, 4).unwrap();
        assert_eq!(k.knots(), &[0.0, 0.0, 0.0, 0.0, 0.1, 0.3, 0.6, 1.0, 1.0, 1.0, 1.0]);
        // Two spans over four grid increments: the knot lands on t_2.
        let k = KnotVector::clamped_on_grid(&grid, 5, 4).unwrap();
        assert_eq!(k.knots()[4], 0.3);
        // Three spans: fractional index 4/3 between t_1 and t_2.
        let k = KnotVector::clamped_on_grid(&grid, 6, 4).unwrap();
        assert_abs_diff_eq!(k.knots()[4], 0.1 + (0.3 - 0.1) / 3.0, epsilon = 1e-15);
        let uniform: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let a = KnotVector::clamped_on_grid(&uniform, 13, 4).unwrap();
        assert_eq!(a, KnotVector::clamped_uniform(1.0, 13, 4).unwrap());
    }

    #[test]
    fn hat_function_peaks_at_knot() {
        let k = KnotVector::clamped_uniform(1.0, 3, 2).unwrap();
        assert_eq!(k.eval_basis(0.5).unwrap(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn single_span_cubic_is_bernstein() {
        let k = KnotVector::clamped_uniform(1.0, 4, 4).unwrap();
        for &t in &[0.0, 0.2, 0.5, 0.77, 1.0] {
            let s = 1.0 - t;
            let bern = [s * s * s, 3.0 * t * s * s, 3.0 * t * t * s, t * t * t];
            let b = k.eval_basis(t).unwrap();
            for (x, y) in b.iter().zip(bern) {
                assert_abs_diff_eq!(*x, y, epsilon = 1e-15);
            }
        }
        let b = k.eval_basis(0.5).unwrap();
        assert_eq!(b, vec![0.125, 0.375, 0.375, 0.125]);
    }

    #[test]
    fn right_endpoint_is_left_continuous() {
        let k = KnotVector::clamped_uniform(3.0, 7, 4).unwrap();
        let b = k.eval_basis(3.0).unwrap();
        assert_eq!(b[6], 1.0);
        assert_abs_diff_eq!(b.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let k = KnotVector::clamped_uniform(1.0, 5, 3).unwrap();
        assert!(matches!(k.eval_basis(-1e-9), Err(Error::OutOfDomain { .. })));
        assert!(matches!(k.eval_basis(1.0 + 1e-9), Err(Error::OutOfDomain { .. })));
        assert!(k.eval_spline(&[1.0; 5], f64::NAN).is_err());
        assert!(matches!(k.eval_spline(&[1.0; 4], 0.5), Err(Error::Dimension { .. })));
    }

    #[test]
    fn constants_and_zero_reproduced() {
        let k = KnotVector::clamped_uniform(2.0, 9, 4).unwrap();
        for i in 0..=20 {
            let t = 0.1 * i as f64;
            assert_abs_diff_eq!(k.eval_spline(&[3.7; 9], t).unwrap(), 3.7, epsilon = 1e-14);
            assert_eq!(k.eval_spline(&[0.0; 9], t).unwrap(), 0.0);
        }
    }

    #[test]
    fn greville_reproduces_identity() {
        for q in 1..=5 {
            let k = KnotVector::clamped_uniform(1.0, 9, q).unwrap();
            if q == 1 {
                continue;
            }
            let g = k.greville();
            assert_abs_diff_eq!(k.eval_spline(&g, 0.3).unwrap(), 0.3, epsilon = 1e-12);
        }
    }

    #[test]
    fn derivative_of_identity_is_one() {
        let k = KnotVector::clamped_uniform(1.0, 5, 4).unwrap();
        let d = DerivativeOperator::new(&k).unwrap();
        let dc = d.apply(&k.greville()).unwrap();
        assert_eq!(dc.len(), 4);
        for v in dc {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
        assert_eq!(d.target.order(), 3);
        assert_eq!(d.target.knots(), &k.knots()[1..8]);
    }

    #[test]
    fn derivative_structure() {
        let k = KnotVector::clamped_uniform(2.0, 8, 3).unwrap();
        let d = DerivativeOperator::new(&k).unwrap();
        assert_eq!(d.apply(&[4.2; 8]).unwrap(), vec![0.0; 7]);
        for j in 0..7 {
            let row = d.matrix.row(j);
            assert_eq!(row.iter().filter(|x| **x != 0.0).count(), 2);
            assert_eq!(row[j] + row[j + 1], 0.0);
        }
    }

    #[test]
    fn derivative_undefined_for_piecewise_constants() {
        let k = KnotVector::clamped_uniform(1.0, 4, 1).unwrap();
        assert!(matches!(DerivativeOperator::new(&k), Err(Error::DerivativeUndefined { .. })));
        let k = KnotVector::clamped_uniform(1.0, 6, 3).unwrap();
        assert!(DerivativeOperator::chain(&k, 3).is_err());
        assert_eq!(DerivativeOperator::chain(&k, 2).unwrap().target.order(), 1);
    }

    #[test]
    fn second_derivative_of_quadratic() {
        // t^2 in a cubic basis: second derivative is exactly 2 everywhere.
        let k = KnotVector::clamped_uniform(1.0, 7, 4).unwrap();
        let design = Matrix::from_fn(7, 7, |i, j| {
            let t = i as f64 / 6.0;
            k.eval_basis(t).unwrap()[j]
        });
        // Least-squares fit of t^2 (exact, it lies in the space) via normal equations.
        let rhs: Vec<f64> = (0..7).map(|i| (i as f64 / 6.0) * (i as f64 / 6.0)).collect();
        let gram = design.transpose().matmul(&design).unwrap();
        let atb = design.tr_matvec(&rhs).unwrap();
        let (w, v) = crate::linalg::symmetric_eigen(&gram).unwrap();
        let proj = v.tr_matvec(&atb).unwrap();
        let scaled: Vec<f64> = proj.iter().zip(&w).map(|(p, l)| p / l).collect();
        let c = v.matvec(&scaled).unwrap();
        for t in [0.1, 0.45, 0.9] {
            let row = k.derivative_row(t, 2).unwrap();
            assert_abs_diff_eq!(crate::linalg::dot(&row, &c), 2.0, epsilon = 1e-8);
        }
    }
}
