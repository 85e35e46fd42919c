//! Dense row-major matrix operator.

use super::{estimate_spectral_norm, LinearOperator};
use crate::{Error, Result};

/// Dense `rows x cols` matrix stored row-major.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    norm: f64,
}

impl DenseMatrix {
    /// Build from row-major entries. The spectral norm estimate is computed by
    /// power iteration on `A^T A` (50 iterations, relative tolerance 1e-8).
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: entries.len(),
                context: "dense matrix entry count",
            });
        }
        let mut m = DenseMatrix {
            rows,
            cols,
            entries,
            norm: 0.0,
        };
        let norm = estimate_spectral_norm(
            cols,
            |x| {
                let ax = m.apply_raw(x);
                m.adjoint_raw(&ax)
            },
            50,
            1e-8,
        );
        m.norm = norm;
        Ok(m)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        DenseMatrix {
            rows: dim,
            cols: dim,
            entries,
            norm: 1.0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    fn apply_raw(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.entries[r * self.cols..(r + 1) * self.cols];
            *o = crate::linalg::dot(row, x);
        }
        out
    }

    fn adjoint_raw(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            let row = &self.entries[r * self.cols..(r + 1) * self.cols];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * yr;
            }
        }
        out
    }
}

impl LinearOperator for DenseMatrix {
    fn input_dim(&self) -> usize {
        self.cols
    }
    fn output_dim(&self) -> usize {
        self.rows
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "dense apply: bad input length");
        self.apply_raw(x)
    }
    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "dense adjoint: bad input length");
        self.adjoint_raw(y)
    }
    fn norm_estimate(&self) -> f64 {
        self.norm
    }
}
