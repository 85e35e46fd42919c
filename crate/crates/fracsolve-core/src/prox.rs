//! Closed-form proximal and projection subroutines: soft thresholding, box
//! clamping, projections onto the simplex and the box-capped simplex, and the
//! largest-k norm with its subgradient selector.

use crate::{Error, Result};

/// A closed real interval, possibly unbounded. Used to describe per-coordinate
/// subdifferential sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }

    /// Distance from `t` to the interval.
    pub fn dist(&self, t: f64) -> f64 {
        if t < self.lo {
            self.lo - t
        } else if t > self.hi {
            t - self.hi
        } else {
            0.0
        }
    }

    /// Scale by a nonnegative factor (`0 * inf` is treated as 0).
    pub fn scale(&self, s: f64) -> Self {
        debug_assert!(s >= 0.0);
        let mul = |v: f64| {
            if s == 0.0 && v.is_infinite() {
                0.0
            } else {
                s * v
            }
        };
        Interval {
            lo: mul(self.lo),
            hi: mul(self.hi),
        }
    }

    /// Minkowski sum with another interval.
    pub fn plus(&self, other: &Interval) -> Self {
        Interval {
            lo: self.lo + other.lo,
            hi: self.hi + other.hi,
        }
    }
}

/// Componentwise soft threshold `max(|v| - kappa, 0) * sign(v)`, the prox of
/// `kappa * ||.||_1`.
pub fn shrink(v: &[f64], kappa: f64) -> Vec<f64> {
    debug_assert!(kappa >= 0.0);
    v.iter()
        .map(|&x| (x.abs() - kappa).max(0.0) * x.signum())
        .collect()
}

/// In-place variant of [`shrink`], reusing the output buffer.
pub fn shrink_into(v: &[f64], kappa: f64, out: &mut [f64]) {
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x.abs() - kappa).max(0.0) * x.signum();
    }
}

/// `argmin_{x in [lo, hi]} weight * ||x||_1 + 0.5 ||x - z||^2`.
///
/// Both terms are coordinate separable, so the solution is the box clamp of
/// the soft threshold.
pub fn prox_l1_box(z: &[f64], weight: f64, lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    if weight < 0.0 {
        return Err(Error::InvalidArgument("prox weight must be nonnegative".into()));
    }
    for (i, (&l, &h)) in lo.iter().zip(hi).enumerate() {
        if l > h {
            return Err(Error::Infeasible(format!("empty box at coordinate {i}: [{l}, {h}]")));
        }
    }
    Ok(z.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| {
            let s = (v.abs() - weight).max(0.0) * v.signum();
            s.max(l).min(h)
        })
        .collect())
}

/// Projection onto `{x : e^T x = 1, 0 <= x <= d}`.
///
/// The projection is `min(max(z - eta*, 0), d)` where `eta*` is a root of the
/// continuous nonincreasing function `l(eta) = e^T min(max(z - eta, 0), d) - 1`.
/// The root is found by bisection on a bracket expanded until the sign
/// changes, stopping when `|l(eta)| <= 1e-12` or the bracket width drops below
/// 1e-14.
pub fn project_simplex_box(z: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(z.len(), d.len(), "projection: z and d lengths differ");
    if d.iter().any(|&di| di < 0.0) {
        return Err(Error::Infeasible("cap vector must be nonnegative".into()));
    }
    let cap_sum: f64 = d.iter().sum();
    if cap_sum < 1.0 - 1e-12 {
        return Err(Error::Infeasible(format!(
            "caps sum to {cap_sum} < 1; the capped simplex is empty"
        )));
    }
    if cap_sum <= 1.0 + 1e-12 && cap_sum.is_finite() {
        // The only feasible point saturates every cap.
        return Ok(d.to_vec());
    }

    let eval = |eta: f64| -> f64 {
        z.iter()
            .zip(d)
            .map(|(&zi, &di)| (zi - eta).max(0.0).min(di))
            .sum::<f64>()
            - 1.0
    };

    let mut lo = z.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // l(hi) = -1 < 0 always; expand left until l(lo) >= 0.
    let mut width = 1.0;
    while eval(lo) < 0.0 {
        lo -= width;
        width *= 2.0;
        if width > 1e18 {
            return Err(Error::Infeasible("bracket expansion failed".into()));
        }
    }

    let mut eta = 0.5 * (lo + hi);
    for _ in 0..200 {
        eta = 0.5 * (lo + hi);
        let v = eval(eta);
        if v.abs() <= 1e-12 || (hi - lo) <= 1e-14 {
            break;
        }
        if v > 0.0 {
            lo = eta;
        } else {
            hi = eta;
        }
    }
    Ok(z.iter()
        .zip(d)
        .map(|(&zi, &di)| (zi - eta).max(0.0).min(di))
        .collect())
}

/// Projection onto the probability simplex `{x : e^T x = 1, x >= 0}`.
pub fn project_simplex(z: &[f64]) -> Vec<f64> {
    let caps = vec![f64::INFINITY; z.len()];
    // Infinite caps make the simplex nonempty; the error paths cannot trigger.
    project_simplex_box(z, &caps).expect("unconstrained caps are always feasible")
}

fn check_kappa(n: usize, kappa: usize) -> Result<()> {
    if kappa == 0 || kappa > n {
        return Err(Error::InvalidArgument(format!(
            "kappa must lie in [1, {n}], got {kappa}"
        )));
    }
    Ok(())
}

/// Indices of the `kappa` entries of largest absolute value, ties broken by
/// lowest index.
fn topk_indices(x: &[f64], kappa: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| {
        x[b].abs()
            .total_cmp(&x[a].abs())
            .then_with(|| a.cmp(&b))
    });
    idx.truncate(kappa);
    idx
}

/// Largest-k norm: the sum of the `kappa` largest absolute entries.
pub fn topk_norm(x: &[f64], kappa: usize) -> Result<f64> {
    check_kappa(x.len(), kappa)?;
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok(mags[..kappa].iter().sum())
}

/// A subgradient of the largest-k norm at `x`: `sign(x_i)` on the selected
/// top-k index set (lowest index wins ties, `sign(0) = 0`), zero elsewhere.
///
/// The selector satisfies `<s, x> = topk_norm(x, kappa)` and `||s||_inf <= 1`.
pub fn topk_subgradient(x: &[f64], kappa: usize) -> Result<Vec<f64>> {
    check_kappa(x.len(), kappa)?;
    let mut s = vec![0.0; x.len()];
    for i in topk_indices(x, kappa) {
        s[i] = if x[i] > 0.0 {
            1.0
        } else if x[i] < 0.0 {
            -1.0
        } else {
            0.0
        };
    }
    Ok(s)
}

/// A subgradient of the Euclidean norm at `v`: `v / ||v||`, or zero when
/// `||v|| <= 1e-14` (zero belongs to the subdifferential at the origin).
pub fn l2_subgradient(v: &[f64]) -> Vec<f64> {
    let n = crate::linalg::norm(v);
    if n > 1e-14 {
        v.iter().map(|x| x / n).collect()
    } else {
        vec![0.0; v.len()]
    }
}
