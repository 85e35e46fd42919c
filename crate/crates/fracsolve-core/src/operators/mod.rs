//! Linear operator abstraction and the concrete operators the shipped problem
//! families use. Every operator carries a verified adjoint and an upper-bound
//! estimate of its spectral norm.

mod dense;
mod grad2d;
pub mod io;
mod radon;
mod sparse;

pub use dense::DenseMatrix;
pub use grad2d::Grad2d;
pub use radon::mini_radon;
pub use sparse::SparseMatrix;

use crate::rng::Rng;
use crate::{Error, Result};

/// An immutable linear map `K: R^n -> R^p` with its adjoint.
///
/// `apply` and `adjoint` are pure; operators are safe to share across
/// concurrent solver runs. Inputs of the wrong length panic: callers construct
/// iterates from the operator's own dimensions, so a mismatch is a bug.
pub trait LinearOperator: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// `K x`.
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    /// `K^T y`.
    fn adjoint(&self, y: &[f64]) -> Vec<f64>;
    /// Upper bound on the spectral norm, so `||Kx|| <= norm_estimate() * ||x||`.
    fn norm_estimate(&self) -> f64;
}

/// Relative inflation applied to power-iteration norm estimates so the result
/// is an upper bound rather than a from-below approximation.
pub(crate) const NORM_UPPER_BIAS: f64 = 1e-7;

/// Largest eigenvalue of a symmetric positive semidefinite map by power
/// iteration with a fixed deterministic start vector.
pub fn power_iteration_lambda_max<F>(dim: usize, mut apply: F, max_iter: usize, rel_tol: f64) -> f64
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    assert!(dim > 0);
    let mut rng = Rng::new(0x706F_7765_7269_7465, 0);
    let mut v = rng.uniform_vec(dim, -1.0, 1.0);
    let mut lambda = 0.0_f64;
    for _ in 0..max_iter {
        let w = apply(&v);
        let nw = crate::linalg::norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        let next = crate::linalg::dot(&v, &w) / crate::linalg::dot(&v, &v);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if (next - lambda).abs() <= rel_tol * next.abs().max(1e-300) {
            return next.max(0.0);
        }
        lambda = next;
    }
    lambda.max(0.0)
}

/// Spectral norm (largest singular value) of a general operator via power
/// iteration on `K^T K`, inflated by a relative 1e-7 so the result is an
/// upper bound.
pub fn estimate_spectral_norm<F>(input_dim: usize, apply_ktk: F, max_iter: usize, rel_tol: f64) -> f64
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let lambda = power_iteration_lambda_max(input_dim, apply_ktk, max_iter, rel_tol);
    lambda.sqrt() * (1.0 + NORM_UPPER_BIAS)
}

/// The identity operator on `R^n`.
#[derive(Debug, Clone)]
pub struct Identity {
    dim: usize,
}

impl Identity {
    pub fn new(dim: usize) -> Self {
        Identity { dim }
    }
}

impl LinearOperator for Identity {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "identity apply: bad input length");
        x.to_vec()
    }
    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.dim, "identity adjoint: bad input length");
        y.to_vec()
    }
    fn norm_estimate(&self) -> f64 {
        1.0
    }
}

/// The rank-one operator `x -> <mu, x>` (output dimension 1), with adjoint
/// `t -> t * mu`.
#[derive(Debug, Clone)]
pub struct RowVector {
    mu: Vec<f64>,
    norm: f64,
}

impl RowVector {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidArgument("row vector must be nonempty".into()));
        }
        let norm = crate::linalg::norm(&mu);
        Ok(RowVector { mu, norm })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.mu
    }
}

impl LinearOperator for RowVector {
    fn input_dim(&self) -> usize {
        self.mu.len()
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.mu.len(), "row vector apply: bad input length");
        vec![crate::linalg::dot(&self.mu, x)]
    }
    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), 1, "row vector adjoint: bad input length");
        self.mu.iter().map(|m| m * y[0]).collect()
    }
    fn norm_estimate(&self) -> f64 {
        self.norm
    }
}

/// A square grayscale image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    side: usize,
    pixels: Vec<f64>,
}

impl Image2D {
    pub fn new(side: usize, pixels: Vec<f64>) -> Result<Self> {
        if side == 0 || pixels.len() != side * side {
            return Err(Error::DimensionMismatch {
                expected: side * side,
                got: pixels.len(),
                context: "image pixel count must equal side^2",
            });
        }
        Ok(Image2D { side, pixels })
    }

    pub fn zeros(side: usize) -> Self {
        Image2D {
            side,
            pixels: vec![0.0; side * side],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.side + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.pixels[row * self.side + col] = value;
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }
}

/// Check `|<Kx, y> - <x, K^T y>| <= tol * (1 + ||x|| ||y|| ||K||_est)` on
/// `trials` random pairs. Returns the worst scaled discrepancy.
pub fn adjoint_discrepancy(op: &dyn LinearOperator, trials: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed, 0xAD01);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let x = rng.uniform_vec(op.input_dim(), -1.0, 1.0);
        let y = rng.uniform_vec(op.output_dim(), -1.0, 1.0);
        let kx_y = crate::linalg::dot(&op.apply(&x), &y);
        let x_kty = crate::linalg::dot(&x, &op.adjoint(&y));
        let scale = 1.0
            + crate::linalg::norm(&x) * crate::linalg::norm(&y) * op.norm_estimate();
        worst = worst.max((kx_y - x_kty).abs() / scale);
    }
    worst
}
