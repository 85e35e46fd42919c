//! Evaluation metrics: lifted stationarity residual, relative error, RMSE,
//! structural similarity, portfolio infeasibility, and the ratio objective.

use crate::linalg;
use crate::operators::Image2D;
use crate::problem::{theta, FractionalProblem, DENOMINATOR_FLOOR};
use crate::prox::Interval;
use crate::{Error, Result};

/// Builder returning the per-coordinate subdifferential intervals at a point.
pub type IntervalBuilder = Box<dyn Fn(&[f64]) -> Vec<Interval> + Send + Sync>;

/// How the set `dg(x) + N_S(x)` is described for the stationarity residual.
///
/// `Separable`: a builder returning one closed interval per coordinate.
/// `LinearConstraint`: the normal cone of `{e^T x = 1, 0 <= x <= d}` (caps
/// absent for the plain simplex), handled by a one-dimensional search over the
/// multiplier of the sum constraint.
pub enum StatresSupport {
    Separable(IntervalBuilder),
    LinearConstraint { caps: Option<Vec<f64>> },
}

/// Distance from the origin to
/// `f(Kx) * (grad h(x) + dg(x) + N_S(x)) - (g(x) + h(x)) * K^T y_hat`
/// with the subgradient selector `y_hat = f_subgradient(Kx)` held fixed.
///
/// Because one element of the subdifferential of `f` is selected rather than
/// searching all of it, the value is an upper bound on the distance over the
/// full subdifferential; zero still certifies lifted stationarity for the
/// selected subgradient.
pub fn statres(problem: &FractionalProblem, x: &[f64]) -> Result<f64> {
    if !problem.is_feasible(x) {
        return Err(Error::model("statres evaluated at an infeasible point"));
    }
    let support = problem.statres_support().ok_or(Error::StatresUnavailable)?;
    let kx = problem.k_op().apply(x);
    let f = problem.f(&kx);
    if f <= DENOMINATOR_FLOOR {
        return Err(Error::model("statres needs a positive denominator"));
    }
    let num = problem.numerator(x);
    let y_hat = problem.f_subgradient(&kx);
    let kty = problem.k_op().adjoint(&y_hat);
    let grad = problem.grad_h(x);

    match support {
        StatresSupport::Separable(builder) => {
            let intervals = builder(x);
            let mut sq = 0.0;
            for i in 0..x.len() {
                let target = num * kty[i] - f * grad[i];
                sq += intervals[i].scale(f).dist(target).powi(2);
            }
            Ok(sq.sqrt())
        }
        StatresSupport::LinearConstraint { caps } => {
            // Residual coordinates are r_i(eta) = u_i - f * eta, to be
            // projected onto the box normal cone intervals J_i.
            let u: Vec<f64> = (0..x.len()).map(|i| num * kty[i] - f * grad[i]).collect();
            let cones: Vec<Interval> = (0..x.len())
                .map(|i| {
                    let cap = caps.as_ref().map_or(f64::INFINITY, |c| c[i]);
                    box_normal_cone(x[i], cap)
                })
                .collect();
            let excess_sum = |eta: f64| -> f64 {
                u.iter()
                    .zip(&cones)
                    .map(|(&ui, cone)| {
                        let r = ui - f * eta;
                        if r > cone.hi {
                            r - cone.hi
                        } else if r < cone.lo {
                            r - cone.lo
                        } else {
                            0.0
                        }
                    })
                    .sum()
            };
            let distance = |eta: f64| -> f64 {
                u.iter()
                    .zip(&cones)
                    .map(|(&ui, cone)| cone.dist(ui - f * eta).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };

            // The squared distance is convex in eta with derivative
            // -2 f * excess_sum(eta); excess_sum is nonincreasing.
            let scale = u.iter().fold(1.0_f64, |m, v| m.max(v.abs())) / f;
            let mut lo = -scale - 1.0;
            let mut hi = scale + 1.0;
            let mut width = scale + 1.0;
            while excess_sum(lo) < 0.0 {
                lo -= width;
                width *= 2.0;
                if width > 1e18 {
                    // Every cone is unbounded in the needed direction; the
                    // infimum is zero in the limit.
                    return Ok(0.0);
                }
            }
            width = scale + 1.0;
            while excess_sum(hi) > 0.0 {
                hi += width;
                width *= 2.0;
                if width > 1e18 {
                    return Ok(0.0);
                }
            }
            for _ in 0..200 {
                if hi - lo <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if excess_sum(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(distance(0.5 * (lo + hi)))
        }
    }
}

/// Normal cone of `[0, cap]` at `v`, as an interval.
fn box_normal_cone(v: f64, cap: f64) -> Interval {
    let tol = 1e-9;
    let lower_active = v <= tol;
    let upper_active = cap.is_finite() && v >= cap - tol;
    match (lower_active, upper_active) {
        (true, true) => Interval::new(f64::NEG_INFINITY, f64::INFINITY),
        (true, false) => Interval::new(f64::NEG_INFINITY, 0.0),
        (false, true) => Interval::new(0.0, f64::INFINITY),
        (false, false) => Interval::point(0.0),
    }
}

/// Relative error `||x - x*|| / max(||x*||, machine epsilon)`.
pub fn rel_err(x: &[f64], x_star: &[f64]) -> f64 {
    linalg::dist(x, x_star) / linalg::norm(x_star).max(f64::EPSILON)
}

/// Root mean squared error `||x - x*||_F / n^2` for `n x n` images.
pub fn rmse(x: &Image2D, x_star: &Image2D) -> Result<f64> {
    if x.side() != x_star.side() {
        return Err(Error::DimensionMismatch {
            expected: x_star.side(),
            got: x.side(),
            context: "rmse needs equal image sides",
        });
    }
    let n2 = (x.side() * x.side()) as f64;
    Ok(linalg::dist(x.pixels(), x_star.pixels()) / n2)
}

const SSIM_C1: f64 = 0.05;
const SSIM_C2: f64 = 0.05;

/// Mean local structural similarity over all sliding 3x3 windows (stride 1,
/// valid positions only). Local means and (co)variances use the unbiased 1/8
/// normalization over the 9 window samples; the stabilizers are
/// `c1 = c2 = 0.05`.
pub fn ssim(u: &Image2D, v: &Image2D) -> Result<f64> {
    if u.side() != v.side() {
        return Err(Error::DimensionMismatch {
            expected: v.side(),
            got: u.side(),
            context: "ssim needs equal image sides",
        });
    }
    let n = u.side();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "ssim needs side >= 3, got {n}"
        )));
    }
    let mut total = 0.0;
    let windows = ((n - 2) * (n - 2)) as f64;
    for r0 in 0..n - 2 {
        for c0 in 0..n - 2 {
            let mut mu_u = 0.0;
            let mut mu_v = 0.0;
            for dr in 0..3 {
                for dc in 0..3 {
                    mu_u += u.get(r0 + dr, c0 + dc);
                    mu_v += v.get(r0 + dr, c0 + dc);
                }
            }
            mu_u /= 9.0;
            mu_v /= 9.0;
            let mut var_u = 0.0;
            let mut var_v = 0.0;
            let mut cov = 0.0;
            for dr in 0..3 {
                for dc in 0..3 {
                    let du = u.get(r0 + dr, c0 + dc) - mu_u;
                    let dv = v.get(r0 + dr, c0 + dc) - mu_v;
                    var_u += du * du;
                    var_v += dv * dv;
                    cov += du * dv;
                }
            }
            var_u /= 8.0;
            var_v /= 8.0;
            cov /= 8.0;
            total += (2.0 * mu_u * mu_v + SSIM_C1) * (2.0 * cov + SSIM_C2)
                / ((mu_u * mu_u + mu_v * mu_v + SSIM_C1) * (var_u + var_v + SSIM_C2));
        }
    }
    Ok(total / windows)
}

/// `|e^T x - 1| + ||max(-x, 0)||_1 + ||max(x - d, 0)||_1`.
pub fn infeas_portfolio(x: &[f64], d: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), d.len());
    let sum: f64 = x.iter().sum();
    let neg: f64 = x.iter().map(|&v| (-v).max(0.0)).sum();
    let over: f64 = x.iter().zip(d).map(|(&v, &di)| (v - di).max(0.0)).sum();
    (sum - 1.0).abs() + neg + over
}

/// The ratio objective `(g(x) + h(x)) / f(Kx)` at a feasible point.
pub fn objective(problem: &FractionalProblem, x: &[f64]) -> Result<f64> {
    // With u = x the proximity term vanishes for any delta.
    Ok(theta(problem, x, x, 1.0)?.theta)
}
