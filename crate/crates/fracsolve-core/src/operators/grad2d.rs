//! Forward-difference discrete gradient on square images.

use super::LinearOperator;
use crate::{Error, Result};

/// Discrete gradient of an `n x n` image flattened row-major to length `n^2`.
///
/// Output has length `2 n^2`: the first half holds horizontal forward
/// differences (zero at the last column), the second half vertical forward
/// differences (zero at the last row). The adjoint is the matching negative
/// divergence, so `G^T G` is symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct Grad2d {
    side: usize,
}

impl Grad2d {
    pub fn new(side: usize) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidArgument("grad2d needs side >= 1".into()));
        }
        Ok(Grad2d { side })
    }

    /// Side length `n` of the image grid.
    pub fn side(&self) -> usize {
        self.side
    }
}

impl LinearOperator for Grad2d {
    fn input_dim(&self) -> usize {
        self.side * self.side
    }

    fn output_dim(&self) -> usize {
        2 * self.side * self.side
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.side;
        assert_eq!(x.len(), n * n, "grad2d apply: input is not an n x n image");
        let mut out = vec![0.0; 2 * n * n];
        let (dx, dy) = out.split_at_mut(n * n);
        for r in 0..n {
            for c in 0..n {
                let i = r * n + c;
                if c + 1 < n {
                    dx[i] = x[i + 1] - x[i];
                }
                if r + 1 < n {
                    dy[i] = x[i + n] - x[i];
                }
            }
        }
        out
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let n = self.side;
        assert_eq!(y.len(), 2 * n * n, "grad2d adjoint: input is not a 2 n^2 field");
        let (p, q) = y.split_at(n * n);
        let mut out = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                let i = r * n + c;
                let mut acc = 0.0;
                if c >= 1 {
                    acc += p[i - 1];
                }
                if c + 1 < n {
                    acc -= p[i];
                }
                if r >= 1 {
                    acc += q[i - n];
                }
                if r + 1 < n {
                    acc -= q[i];
                }
                out[i] = acc;
            }
        }
        out
    }

    fn norm_estimate(&self) -> f64 {
        // Sharp bound for the forward-difference gradient: ||G||^2 <= 8.
        8.0_f64.sqrt()
    }
}
