#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Textbook recursive B-spline `B_{j,q}(t)` on `knots` with 0/0 = 0 and the
/// last non-degenerate span closed on the right.
pub fn naive_basis(knots: &[f64], j: usize, q: usize, t: f64) -> f64 {
    if q == 1 {
        let (a, b) = (knots[j], knots[j + 1]);
        let end = *knots.last().unwrap();
        if a < b && ((a <= t && t < b) || (t == end && b == end)) {
            return 1.0;
        }
        return 0.0;
    }
    let mut v = 0.0;
    let d1 = knots[j + q - 1] - knots[j];
    if d1 > 0.0 {
        v += (t - knots[j]) / d1 * naive_basis(knots, j, q - 1, t);
    }
    let d2 = knots[j + q] - knots[j + 1];
    if d2 > 0.0 {
        v += (knots[j + q] - t) / d2 * naive_basis(knots, j + 1, q - 1, t);
    }
    v
}

pub fn naive_row(knots: &[f64], q: usize, t: f64) -> Vec<f64> {
    (0..knots.len() - q).map(|j| naive_basis(knots, j, q, t)).collect()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `d/dt B_{j,q}(t)` by the textbook formula
/// `(q-1) [B_{j,q-1}/(τ_{j+q-1}-τ_j) - B_{j+1,q-1}/(τ_{j+q}-τ_{j+1})]`.
pub fn naive_basis_derivative(knots: &[f64], j: usize, q: usize, t: f64) -> f64 {
    let mut v = 0.0;
    let d1 = knots[j + q - 1] - knots[j];
    if d1 > 0.0 {
        v += naive_basis(knots, j, q - 1, t) / d1;
    }
    let d2 = knots[j + q] - knots[j + 1];
    if d2 > 0.0 {
        v -= naive_basis(knots, j + 1, q - 1, t) / d2;
    }
    (q - 1) as f64 * v
}

pub fn naive_derivative_row(knots: &[f64], q: usize, t: f64) -> Vec<f64> {
    (0..knots.len() - q).map(|j| naive_basis_derivative(knots, j, q, t)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Indices of grid points where `B_k > 0`, from knot geometry alone: the open
/// support, plus the clamped endpoints for the first and last function.
pub fn support_points(knots: &[f64], q: usize, k: usize, pts: &[f64]) -> Vec<usize> {
    let j = knots.len() - q;
    let (lo, hi) = (knots[k], knots[k + q]);
    let end = *knots.last().unwrap();
    (0..pts.len())
        .filter(|&i| {
            let t = pts[i];
            (lo < t && t < hi) || (k == 0 && t == 0.0) || (k == j - 1 && t == end)
        })
        .collect()
}

/// Bandwidth of `Cov(u(t_i), u(t_j))` predicted by support overlap.
pub fn overlap_bandwidth(knots: &[f64], q: usize, pts: &[f64]) -> usize {
    (0..knots.len() - q)
        .filter_map(|k| {
            let s = support_points(knots, q, k, pts);
            Some(s.last()? - s.first()?)
        })
        .max()
        .unwrap_or(0)
}
