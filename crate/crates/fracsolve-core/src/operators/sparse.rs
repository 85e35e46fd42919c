//! Compressed sparse row matrix operator.

use super::{estimate_spectral_norm, LinearOperator};
use crate::{Error, Result};

/// Sparse `rows x cols` matrix in CSR form.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    norm: f64,
}

impl SparseMatrix {
    /// Build from `(row, col, value)` triplets; duplicate positions are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("sparse matrix must be nonempty".into()));
        }
        for &(r, c, _) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({r}, {c}) outside {rows} x {cols}"
                )));
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut cur_row = 0usize;
        for &(r, c, v) in &sorted {
            while cur_row < r {
                cur_row += 1;
                row_ptr[cur_row] = col_idx.len();
            }
            if col_idx.len() > row_ptr[cur_row] && *col_idx.last().unwrap() == c {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
            }
        }
        while cur_row < rows {
            cur_row += 1;
            row_ptr[cur_row] = col_idx.len();
        }
        let mut m = SparseMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
            norm: 0.0,
        };
        let norm = estimate_spectral_norm(
            cols,
            |x| {
                let ax = m.apply_raw(x);
                m.adjoint_raw(&ax)
            },
            120,
            1e-10,
        );
        m.norm = norm;
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterate the stored entries of one row as `(col, value)` pairs.
    pub fn row_entries(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// All stored entries as `(row, col, value)` triplets in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                out.push((r, c, v));
            }
        }
        out
    }

    fn apply_raw(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (c, v) in self.row_entries(r) {
                acc += v * x[c];
            }
            *o = acc;
        }
        out
    }

    fn adjoint_raw(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (c, v) in self.row_entries(r) {
                out[c] += v * yr;
            }
        }
        out
    }
}

impl LinearOperator for SparseMatrix {
    fn input_dim(&self) -> usize {
        self.cols
    }
    fn output_dim(&self) -> usize {
        self.rows
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "sparse apply: bad input length");
        self.apply_raw(x)
    }
    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "sparse adjoint: bad input length");
        self.adjoint_raw(y)
    }
    fn norm_estimate(&self) -> f64 {
        self.norm
    }
}
