//! Plain-text persistence for matrices, vectors, and images.
//!
//! Dense data uses the format `rows cols` on the first line followed by
//! row-major whitespace-separated decimals. Sparse data uses `rows cols nnz`
//! followed by one `i j v` triplet per line (0-based indices). Values are
//! written in shortest round-trip form, so save/load is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::{DenseMatrix, Image2D, SparseMatrix};
use crate::{Error, Result};

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a decimal number, got {tok:?}"),
    })
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a nonnegative integer, got {tok:?}"),
    })
}

fn dense_to_string(rows: usize, cols: usize, entries: &[f64]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{rows} {cols}");
    for r in 0..rows {
        let row = &entries[r * cols..(r + 1) * cols];
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

fn dense_from_str(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut lines = text.lines().enumerate();
    let (line_no, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let mut toks = header.split_whitespace();
    let rows = parse_usize(toks.next().unwrap_or(""), line_no + 1)?;
    let cols = parse_usize(toks.next().unwrap_or(""), line_no + 1)?;
    if toks.next().is_some() {
        return Err(Error::Parse {
            line: line_no + 1,
            message: "header must be exactly `rows cols`".into(),
        });
    }
    let mut entries = Vec::with_capacity(rows * cols);
    for (line_no, line) in lines {
        for tok in line.split_whitespace() {
            entries.push(parse_f64(tok, line_no + 1)?);
        }
    }
    if entries.len() != rows * cols {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: format!("expected {} entries, found {}", rows * cols, entries.len()),
        });
    }
    Ok((rows, cols, entries))
}

pub fn save_dense(path: &Path, matrix: &DenseMatrix) -> Result<()> {
    std::fs::write(path, dense_to_string(matrix.rows(), matrix.cols(), matrix.entries()))?;
    Ok(())
}

pub fn load_dense(path: &Path) -> Result<DenseMatrix> {
    let text = std::fs::read_to_string(path)?;
    let (rows, cols, entries) = dense_from_str(&text)?;
    DenseMatrix::new(rows, cols, entries)
}

/// Vectors are stored as `n x 1` matrices.
pub fn save_vector(path: &Path, v: &[f64]) -> Result<()> {
    std::fs::write(path, dense_to_string(v.len(), 1, v))?;
    Ok(())
}

/// Accepts either an `n x 1` or a `1 x n` matrix.
pub fn load_vector(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let (rows, cols, entries) = dense_from_str(&text)?;
    if rows != 1 && cols != 1 {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected a vector, got a {rows} x {cols} matrix"),
        });
    }
    Ok(entries)
}

pub fn save_image(path: &Path, image: &Image2D) -> Result<()> {
    std::fs::write(
        path,
        dense_to_string(image.side(), image.side(), image.pixels()),
    )?;
    Ok(())
}

pub fn load_image(path: &Path) -> Result<Image2D> {
    let text = std::fs::read_to_string(path)?;
    let (rows, cols, entries) = dense_from_str(&text)?;
    if rows != cols {
        return Err(Error::Parse {
            line: 1,
            message: format!("image must be square, got {rows} x {cols}"),
        });
    }
    Image2D::new(rows, entries)
}

pub fn save_sparse(path: &Path, matrix: &SparseMatrix) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", matrix.rows(), matrix.cols(), matrix.nnz());
    for (r, c, v) in matrix.triplets() {
        let _ = writeln!(out, "{r} {c} {v}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_sparse(path: &Path) -> Result<SparseMatrix> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (line_no, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let mut toks = header.split_whitespace();
    let rows = parse_usize(toks.next().unwrap_or(""), line_no + 1)?;
    let cols = parse_usize(toks.next().unwrap_or(""), line_no + 1)?;
    let nnz = parse_usize(toks.next().unwrap_or(""), line_no + 1)?;
    let mut triplets = Vec::with_capacity(nnz);
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let r = parse_usize(toks.next().unwrap_or(""), line_no + 1)?;
        let c = parse_usize(toks.next().unwrap_or(""), line_no + 1)?;
        let v = parse_f64(toks.next().unwrap_or(""), line_no + 1)?;
        triplets.push((r, c, v));
    }
    if triplets.len() != nnz {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: format!("expected {} triplets, found {}", nnz, triplets.len()),
        });
    }
    SparseMatrix::from_triplets(rows, cols, &triplets)
}
