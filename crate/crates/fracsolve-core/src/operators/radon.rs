//! Parallel-beam discrete Radon transform built by exact ray tracing.
//!
//! The pixel grid is `side x side` unit squares centered at the origin. For
//! each projection angle the detector bins span the grid diagonal, and each
//! matrix row holds the exact intersection lengths of one ray with the pixels
//! it traverses (Siddon-style traversal), stored sparse.

use super::sparse::SparseMatrix;
use crate::{Error, Result};

/// Build the sparse projection matrix.
///
/// Angles are `k * max_angle_deg / num_angles` for `k = 0..=num_angles`
/// (inclusive, so `num_angles + 1` views). Rows are ordered angle-major, ray
/// offset minor. Pixel columns use the row-major image layout with row 0 at
/// the top of the grid.
pub fn mini_radon(
    side: usize,
    num_angles: usize,
    max_angle_deg: f64,
    rays_per_angle: usize,
) -> Result<SparseMatrix> {
    if side < 8 {
        return Err(Error::InvalidArgument(format!(
            "radon grid needs side >= 8, got {side}"
        )));
    }
    if num_angles == 0 || rays_per_angle == 0 {
        return Err(Error::InvalidArgument(
            "degenerate radon geometry: need at least one angle and one ray".into(),
        ));
    }
    let s = side as f64;
    let detector_len = s * std::f64::consts::SQRT_2;
    let mut triplets = Vec::new();
    let mut row = 0usize;
    for k in 0..=num_angles {
        let theta = (k as f64 * max_angle_deg / num_angles as f64).to_radians();
        let dir = (theta.cos(), theta.sin());
        let perp = (-theta.sin(), theta.cos());
        for j in 0..rays_per_angle {
            let offset = -detector_len / 2.0 + (j as f64 + 0.5) * detector_len / rays_per_angle as f64;
            let point = (offset * perp.0, offset * perp.1);
            for (pixel, length) in ray_pixel_intersections(side, point, dir) {
                triplets.push((row, pixel, length));
            }
            row += 1;
        }
    }
    SparseMatrix::from_triplets((num_angles + 1) * rays_per_angle, side * side, &triplets)
}

/// Exact intersection lengths of the line `point + t * dir` (unit `dir`) with
/// the unit pixels of a `side x side` grid centered at the origin.
pub(crate) fn ray_pixel_intersections(
    side: usize,
    point: (f64, f64),
    dir: (f64, f64),
) -> Vec<(usize, f64)> {
    let half = side as f64 / 2.0;
    let eps = 1e-12;

    // Clip the line to the grid square.
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for (p, d) in [(point.0, dir.0), (point.1, dir.1)] {
        if d.abs() < eps {
            if p < -half || p > half {
                return Vec::new();
            }
        } else {
            let (a, b) = ((-half - p) / d, (half - p) / d);
            t_enter = t_enter.max(a.min(b));
            t_exit = t_exit.min(a.max(b));
        }
    }
    if t_exit - t_enter <= eps {
        return Vec::new();
    }

    // Parameter values where the ray crosses pixel boundary lines.
    let mut ts = vec![t_enter, t_exit];
    for (p, d) in [(point.0, dir.0), (point.1, dir.1)] {
        if d.abs() < eps {
            continue;
        }
        for i in 0..=side {
            let t = (-half + i as f64 - p) / d;
            if t > t_enter + eps && t < t_exit - eps {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut out = Vec::new();
    for pair in ts.windows(2) {
        let len = pair[1] - pair[0];
        if len <= eps {
            continue;
        }
        let tm = 0.5 * (pair[0] + pair[1]);
        let x = point.0 + tm * dir.0;
        let y = point.1 + tm * dir.1;
        let col = (x + half).floor();
        let row = (half - y).floor();
        if col < 0.0 || row < 0.0 {
            continue;
        }
        let (col, row) = (col as usize, row as usize);
        if col >= side || row >= side {
            continue;
        }
        out.push((row * side + col, len));
    }
    out
}
