//! ADMM solver for the box-constrained total-variation proximal subproblem
//!
//! ```text
//!     argmin_{x in [lo, hi]}  lambda ||Gx||_1 + 1/(2 delta) ||x - z||^2
//! ```
//!
//! with `G` the discrete image gradient. The splitting introduces `w = Gx`
//! (penalty `alpha`) and a boxed copy `h = x` (penalty `beta`). Each outer
//! sweep runs, in order: a shrink update for `w`, a conjugate-gradient solve
//! of the regularized normal equations for `x`, a clamp update for `h`, and
//! the two dual ascent steps. The `(w, v, h, mu)` state can be carried across
//! calls to warm start consecutive subproblems.

use crate::linalg;
use crate::operators::{Grad2d, LinearOperator};
use crate::prox::shrink;
use crate::{Error, Result};

/// Tunables for the ADMM sweeps and the inner CG solve.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    /// Penalty on the gradient split `w = Gx`.
    pub alpha: f64,
    /// Penalty on the box split `h = x`.
    pub beta: f64,
    /// Number of outer sweeps per call.
    pub max_outer: usize,
    /// Relative residual target for the CG solve.
    pub cg_tol: f64,
    /// CG iteration cap.
    pub cg_max: usize,
    /// Optional early stop: end the sweeps once the scaled splitting
    /// residuals `||Gx - w||` and `||x - h||` both drop below this. Zero
    /// disables the check and exactly `max_outer` sweeps run.
    pub outer_tol: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            alpha: 5.0,
            beta: 5e-4,
            max_outer: 3,
            cg_tol: 1e-10,
            cg_max: 200,
            outer_tol: 0.0,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.cg_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "admm penalties and cg tolerance must be positive".into(),
            ));
        }
        if self.max_outer == 0 || self.cg_max == 0 {
            return Err(Error::InvalidArgument(
                "admm iteration counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Splitting variables carried between calls for warm starting, plus
/// diagnostics.
#[derive(Debug, Clone)]
pub struct AdmmState {
    x: Vec<f64>,
    w: Vec<f64>,
    v: Vec<f64>,
    h: Vec<f64>,
    mu: Vec<f64>,
    /// Number of CG solves that hit the iteration cap before reaching the
    /// residual target (the last iterate is used regardless).
    pub cg_exhausted: usize,
}

impl AdmmState {
    fn cold(grad: &Grad2d, z: &[f64], lo: &[f64], hi: &[f64]) -> Self {
        let x = linalg::clamp_slice(z, lo, hi);
        let w = grad.apply(&x);
        let n2 = x.len();
        AdmmState {
            v: vec![0.0; 2 * n2],
            h: x.clone(),
            mu: vec![0.0; n2],
            w,
            x,
            cg_exhausted: 0,
        }
    }
}

/// One call runs `cfg.max_outer` sweeps and returns the final (unclamped)
/// `x` iterate together with the state for warm starting.
#[allow(clippy::too_many_arguments)]
pub fn tv_prox_admm(
    z: &[f64],
    lambda: f64,
    delta: f64,
    lo: &[f64],
    hi: &[f64],
    grad: &Grad2d,
    cfg: &AdmmConfig,
    warm: Option<AdmmState>,
) -> Result<(Vec<f64>, AdmmState)> {
    let n2 = grad.input_dim();
    if z.len() != n2 {
        return Err(Error::DimensionMismatch {
            expected: n2,
            got: z.len(),
            context: "tv prox input must be a flattened n x n image",
        });
    }
    cfg.validate()?;
    let mut st = warm.unwrap_or_else(|| AdmmState::cold(grad, z, lo, hi));

    let ridge = 1.0 / delta + cfg.beta;
    let apply_system = |p: &[f64]| -> Vec<f64> {
        let gp = grad.apply(p);
        let mut out = grad.adjoint(&gp);
        for (o, &pi) in out.iter_mut().zip(p) {
            *o = cfg.alpha * *o + ridge * pi;
        }
        out
    };

    for _ in 0..cfg.max_outer {
        // w-update: shrink(Gx + v, lambda / alpha)
        let gx = grad.apply(&st.x);
        let gx_plus_v: Vec<f64> = gx.iter().zip(&st.v).map(|(a, b)| a + b).collect();
        st.w = shrink(&gx_plus_v, lambda / cfg.alpha);

        // x-update: (alpha G^T G + (1/delta + beta) I) x = rhs
        let w_minus_v: Vec<f64> = st.w.iter().zip(&st.v).map(|(a, b)| a - b).collect();
        let mut rhs = grad.adjoint(&w_minus_v);
        for i in 0..n2 {
            rhs[i] = z[i] / delta + cfg.alpha * rhs[i] + cfg.beta * (st.h[i] - st.mu[i]);
        }
        let converged = cg_solve(&apply_system, &rhs, &mut st.x, cfg.cg_tol, cfg.cg_max);
        if !converged {
            st.cg_exhausted += 1;
        }

        // h-update: clamp(x + mu)
        for i in 0..n2 {
            st.h[i] = (st.x[i] + st.mu[i]).max(lo[i]).min(hi[i]);
        }

        // Dual updates.
        let gx = grad.apply(&st.x);
        for ((v, g), w) in st.v.iter_mut().zip(&gx).zip(&st.w) {
            *v += g - w;
        }
        for ((mu, x), h) in st.mu.iter_mut().zip(&st.x).zip(&st.h) {
            *mu += x - h;
        }

        if cfg.outer_tol > 0.0 {
            let scale = (n2 as f64).sqrt();
            let res_w = gx
                .iter()
                .zip(&st.w)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                / scale;
            let res_h = linalg::dist(&st.x, &st.h) / scale;
            if res_w <= cfg.outer_tol && res_h <= cfg.outer_tol {
                break;
            }
        }
    }
    Ok((st.x.clone(), st))
}

/// Conjugate gradient for a symmetric positive definite system, warm started
/// from the value in `x`. Returns whether the relative residual target was
/// reached within the iteration cap.
fn cg_solve<F>(apply: &F, rhs: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> bool
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let target = tol * linalg::norm(rhs).max(1e-300);
    let ax = apply(x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rs = linalg::dot(&r, &r);
    if rs.sqrt() <= target {
        return true;
    }
    for _ in 0..max_iter {
        let ap = apply(&p);
        let alpha = rs / linalg::dot(&p, &ap);
        linalg::axpy(alpha, &p, x);
        linalg::axpy(-alpha, &ap, &mut r);
        let rs_new = linalg::dot(&r, &r);
        if rs_new.sqrt() <= target {
            return true;
        }
        let beta = rs_new / rs;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rs = rs_new;
    }
    false
}

/// Objective of the TV proximal subproblem at `x`.
pub fn tv_prox_objective(x: &[f64], z: &[f64], lambda: f64, delta: f64, grad: &Grad2d) -> f64 {
    let gx = grad.apply(x);
    lambda * linalg::norm1(&gx) + linalg::dist(x, z).powi(2) / (2.0 * delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn run(
        z: &[f64],
        lambda: f64,
        delta: f64,
        lo: &[f64],
        hi: &[f64],
        side: usize,
        outer: usize,
    ) -> Vec<f64> {
        let grad = Grad2d::new(side).unwrap();
        let cfg = AdmmConfig {
            max_outer: outer,
            ..AdmmConfig::default()
        };
        let (x, _) = tv_prox_admm(z, lambda, delta, lo, hi, &grad, &cfg, None).unwrap();
        x
    }

    #[test]
    fn zero_lambda_reduces_to_box_clamp() {
        // With the TV term gone the subproblem is a pure box projection. The
        // box split needs a non-vanishing penalty to converge in a reasonable
        // number of sweeps.
        let mut rng = Rng::new(50, 0);
        let z = rng.uniform_vec(16, -2.0, 2.0);
        let lo = vec![-0.5; 16];
        let hi = vec![0.5; 16];
        let grad = Grad2d::new(4).unwrap();
        let cfg = AdmmConfig {
            beta: 1.0,
            max_outer: 400,
            ..AdmmConfig::default()
        };
        let (x, _) = tv_prox_admm(&z, 0.0, 1.0, &lo, &hi, &grad, &cfg, None).unwrap();
        let clamp = linalg::clamp_slice(&z, &lo, &hi);
        assert!(linalg::dist(&x, &clamp) <= 1e-6, "gap {}", linalg::dist(&x, &clamp));
    }

    #[test]
    fn constant_feasible_image_is_a_fixed_point() {
        let z = vec![0.25; 16];
        let lo = vec![0.0; 16];
        let hi = vec![1.0; 16];
        let x = run(&z, 0.1, 1.0, &lo, &hi, 4, 50);
        assert!(linalg::dist(&x, &z) <= 1e-9, "gap {}", linalg::dist(&x, &z));
    }

    /// Long-run projected subgradient oracle for the same objective.
    fn projected_subgradient_oracle(
        z: &[f64],
        lambda: f64,
        delta: f64,
        lo: &[f64],
        hi: &[f64],
        grad: &Grad2d,
        iters: usize,
    ) -> f64 {
        let mut x = linalg::clamp_slice(z, lo, hi);
        let mut best = tv_prox_objective(&x, z, lambda, delta, grad);
        for t in 1..=iters {
            let gx = grad.apply(&x);
            let sign: Vec<f64> = gx.iter().map(|&v| v.signum() * f64::from(v != 0.0)).collect();
            let mut g = grad.adjoint(&sign);
            for i in 0..x.len() {
                g[i] = lambda * g[i] + (x[i] - z[i]) / delta;
            }
            let step = 0.5 / (t as f64).sqrt();
            for i in 0..x.len() {
                x[i] = (x[i] - step * g[i]).max(lo[i]).min(hi[i]);
            }
            best = best.min(tv_prox_objective(&x, z, lambda, delta, grad));
        }
        best
    }

    #[test]
    fn objective_matches_long_run_subgradient_oracle() {
        let mut rng = Rng::new(51, 0);
        let z = rng.uniform_vec(16, -1.0, 1.0);
        let lo = vec![-1.0; 16];
        let hi = vec![1.0; 16];
        let grad = Grad2d::new(4).unwrap();
        let lambda = 0.1;
        let delta = 1.0;
        let cfg = AdmmConfig {
            max_outer: 60,
            ..AdmmConfig::default()
        };
        let (x, _) = tv_prox_admm(&z, lambda, delta, &lo, &hi, &grad, &cfg, None).unwrap();
        let ours = tv_prox_objective(&x, &z, lambda, delta, &grad);
        let oracle = projected_subgradient_oracle(&z, lambda, delta, &lo, &hi, &grad, 100_000);
        assert!(
            (ours - oracle).abs() <= 1e-3,
            "admm objective {ours} vs oracle {oracle}"
        );
    }

    #[test]
    fn objective_nonincreasing_across_sweeps() {
        let mut rng = Rng::new(52, 0);
        let z = rng.uniform_vec(16, -1.0, 1.0);
        let lo = vec![-1.0; 16];
        let hi = vec![1.0; 16];
        let grad = Grad2d::new(4).unwrap();
        let cfg = AdmmConfig {
            max_outer: 1,
            ..AdmmConfig::default()
        };
        let mut state = None;
        let mut prev = f64::INFINITY;
        for sweep in 0..12 {
            let (x, st) = tv_prox_admm(&z, 0.1, 1.0, &lo, &hi, &grad, &cfg, state.take()).unwrap();
            let obj = tv_prox_objective(&x, &z, 0.1, 1.0, &grad);
            assert!(
                obj <= prev + 1e-10,
                "sweep {sweep}: objective rose from {prev} to {obj}"
            );
            prev = obj;
            state = Some(st);
        }
    }

    #[test]
    fn warm_start_reduces_objective_over_repeated_calls() {
        let mut rng = Rng::new(53, 0);
        let z = rng.uniform_vec(64, 0.0, 1.0);
        let lo = vec![0.0; 64];
        let hi = vec![1.0; 64];
        let grad = Grad2d::new(8).unwrap();
        let cfg = AdmmConfig::default();
        let (x1, st) = tv_prox_admm(&z, 0.2, 0.5, &lo, &hi, &grad, &cfg, None).unwrap();
        let (x2, _) = tv_prox_admm(&z, 0.2, 0.5, &lo, &hi, &grad, &cfg, Some(st)).unwrap();
        let o1 = tv_prox_objective(&linalg::clamp_slice(&x1, &lo, &hi), &z, 0.2, 0.5, &grad);
        let o2 = tv_prox_objective(&linalg::clamp_slice(&x2, &lo, &hi), &z, 0.2, 0.5, &grad);
        assert!(o2 <= o1 + 1e-9, "warm start objective {o2} vs cold {o1}");
    }
}
