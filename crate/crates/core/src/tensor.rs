//! Tensor-product B-spline priors for space-time fields
//! `u(x, t) = ∑∑ θ_{j1,j2} B_{j1}(x) B_{j2}(t)`.
//!
//! Mixed partial derivatives are again tensor-product splines, with
//! coefficients `D_x^(rx) θ (D_t^(rt))ᵀ`. Under iid `N(0, σ²)` coefficients
//! the field and all its mixed partials are jointly Gaussian.
//!
//! Design rows are flattened x-major: entry `j1 · J_t + j2`.

use alloc::vec::Vec;

use crate::bspline::{DerivativeOperator, KnotVector};
use crate::error::{Error, Result};
use crate::gaussian::GaussianVector;
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct TensorBasis {
    pub kx: KnotVector,
    pub kt: KnotVector,
}

impl TensorBasis {
    pub fn new(kx: KnotVector, kt: KnotVector) -> Self {
        Self { kx, kt }
    }

    /// `(J_x, J_t)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.kx.basis_count(), self.kt.basis_count())
    }

    fn check_coefficients(&self, c: &TensorCoefficients) -> Result<()> {
        let (jx, jt) = self.shape();
        if c.values.rows() != jx {
            return Err(Error::Dimension { expected: jx, found: c.values.rows() });
        }
        if c.values.cols() != jt {
            return Err(Error::Dimension { expected: jt, found: c.values.cols() });
        }
        Ok(())
    }

    /// Flattened design row of `∂^{rx+rt} u / ∂x^rx ∂t^rt` at `(x, t)`.
    pub fn design_row(&self, x: f64, t: f64, rx: usize, rt: usize) -> Result<Vec<f64>> {
        let wx = self.kx.derivative_row(x, rx)?;
        let wt = self.kt.derivative_row(t, rt)?;
        let mut row = Vec::with_capacity(wx.len() * wt.len());
        for a in &wx {
            row.extend(wt.iter().map(|b| a * b));
        }
        Ok(row)
    }
}

/// `J_x × J_t` coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCoefficients {
    pub values: Matrix,
}

impl TensorCoefficients {
    pub fn new(values: Matrix) -> Self {
        Self { values }
    }
}

/// `b_x(x)ᵀ · C · b_t(t)`.
pub fn tensor_eval(tb: &TensorBasis, c: &TensorCoefficients, x: f64, t: f64) -> Result<f64> {
    tb.check_coefficients(c)?;
    let (fx, bx) = tb.kx.eval_basis_local(x)?;
    let (ft, bt) = tb.kt.eval_basis_local(t)?;
    let mut acc = 0.0;
    for (a, wx) in bx.iter().enumerate() {
        let row = &c.values.row(fx + a)[ft..ft + bt.len()];
        acc += wx * linalg::dot(row, &bt);
    }
    Ok(acc)
}

/// Coefficient map for a mixed partial derivative and the reduced basis the
/// result lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPartial {
    pub dx: Matrix,
    pub dt: Matrix,
    pub basis: TensorBasis,
}

impl MixedPartial {
    /// `C ↦ D_x C D_tᵀ`.
    pub fn apply(&self, c: &TensorCoefficients) -> Result<TensorCoefficients> {
        Ok(TensorCoefficients::new(self.dx.matmul(&c.values)?.matmul_transposed(&self.dt)?))
    }
}

pub fn mixed_partial_operator(tb: &TensorBasis, rx: usize, rt: usize) -> Result<MixedPartial> {
    let ox = DerivativeOperator::chain(&tb.kx, rx)?;
    let ot = DerivativeOperator::chain(&tb.kt, rt)?;
    Ok(MixedPartial { dx: ox.matrix, dt: ot.matrix, basis: TensorBasis::new(ox.target, ot.target) })
}

/// Zero-mean Gaussian of the requested field or mixed-partial values under
/// iid `N(0, σ²)` coefficients: `Cov_ij = σ² ⟨row_i, row_j⟩`.
pub fn joint_field_gaussian(
    tb: &TensorBasis,
    prior_scale: f64,
    points: &[(f64, f64)],
    derivative_orders: &[(usize, usize)],
) -> Result<GaussianVector> {
    if points.len() != derivative_orders.len() {
        return Err(Error::Dimension { expected: points.len(), found: derivative_orders.len() });
    }
    if !(prior_scale > 0.0) || !prior_scale.is_finite() {
        return Err(Error::InvalidConfig("prior scale must be positive and finite"));
    }
    let (jx, jt) = tb.shape();
    let rows = points
        .iter()
        .zip(derivative_orders)
        .map(|(&(x, t), &(rx, rt))| tb.design_row(x, t, rx, rt))
        .collect::<Result<Vec<_>>>()?;
    let design = Matrix::from_rows(jx * jt, &rows)?;
    let cov = design.matmul_transposed(&design)?.scaled(prior_scale);
    GaussianVector::zero_mean(cov)
}

/// Product grid `xs × ts` ordered x-major, the ordering under which the
/// field covariance is `σ² (B_x B_xᵀ) ⊗ (B_t B_tᵀ)`.
pub fn product_grid(xs: &[f64], ts: &[f64]) -> Vec<(f64, f64)> {
    xs.iter().flat_map(|&x| ts.iter().map(move |&t| (x, t))).collect()
}
