//! The fractional program abstraction and its concrete instances.
//!
//! A [`FractionalProblem`] bundles everything the solver needs about
//!
//! ```text
//!     minimize over x in S    ( g(x) + h(x) ) / f(Kx)
//! ```
//!
//! namely the smooth part `h` with its gradient, the convex part `g` together
//! with a constrained proximal map for `g + indicator(S)`, the denominator `f`
//! with a subgradient selector, and the linear operator `K`. Four builders
//! produce the shipped instances: L1-over-top-k sparse recovery, TV-regularized
//! CT reconstruction, portfolio selection, and Sharpe-ratio minimization.

use std::sync::Arc;

use crate::admm::{tv_prox_admm, AdmmConfig, AdmmState};
use crate::linalg;
use crate::metrics::StatresSupport;
use crate::operators::{DenseMatrix, Grad2d, Identity, LinearOperator, RowVector};
use crate::prox::{self, Interval};
use crate::{Error, Result};

/// Denominators at or below this value are treated as a model violation.
pub const DENOMINATOR_FLOOR: f64 = 1e-14;

/// Numerators below this are a model violation (the model requires
/// `g + h >= 0` on the feasible set).
pub const NUMERATOR_FLOOR: f64 = -1e-12;

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type PredicateFn = Box<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// The constrained proximal map `z -> argmin_{x in S} g(x) + ||x - z||^2 / (2 delta)`.
///
/// Implementations may carry warm-start state across calls; each solver run
/// owns its problem instance, so this is the only mutable piece.
pub trait ConstrainedProx: Send {
    fn evaluate(&mut self, z: &[f64], delta: f64) -> Result<Vec<f64>>;

    /// Drain any diagnostics accumulated since the last call.
    fn take_warnings(&mut self) -> Vec<String> {
        Vec::new()
    }
}

/// Merit function values at a point: `phi = g + h + ||x - u||^2/(2 delta)`
/// (the indicator of S contributes zero for feasible `x`) and the monitored
/// ratio `theta = phi / f(Kx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeritValue {
    pub phi: f64,
    pub theta: f64,
    pub f_at_kx: f64,
}

pub struct FractionalProblem {
    family: &'static str,
    dim: usize,
    k_op: Arc<dyn LinearOperator>,
    h_value: ScalarFn,
    h_gradient: VectorFn,
    lipschitz_grad_h: Option<f64>,
    g_value: ScalarFn,
    f_value: ScalarFn,
    f_subgradient: VectorFn,
    prox: Box<dyn ConstrainedProx>,
    feasible_start: Vec<f64>,
    feasibility: PredicateFn,
    statres_support: Option<StatresSupport>,
}

impl FractionalProblem {
    pub fn family(&self) -> &'static str {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k_op(&self) -> &dyn LinearOperator {
        self.k_op.as_ref()
    }

    pub fn h(&self, x: &[f64]) -> f64 {
        (self.h_value)(x)
    }

    pub fn grad_h(&self, x: &[f64]) -> Vec<f64> {
        (self.h_gradient)(x)
    }

    /// Lipschitz constant of the gradient of `h`, when known.
    pub fn lipschitz_grad_h(&self) -> Option<f64> {
        self.lipschitz_grad_h
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        (self.g_value)(x)
    }

    /// Numerator `g(x) + h(x)`.
    pub fn numerator(&self, x: &[f64]) -> f64 {
        self.g(x) + self.h(x)
    }

    /// Denominator term `f(w)` evaluated at a point `w` of the K-image space.
    pub fn f(&self, w: &[f64]) -> f64 {
        (self.f_value)(w)
    }

    /// A subgradient of `f` at `w` chosen by the instance's selector.
    pub fn f_subgradient(&self, w: &[f64]) -> Vec<f64> {
        (self.f_subgradient)(w)
    }

    pub fn constrained_prox(&mut self, z: &[f64], delta: f64) -> Result<Vec<f64>> {
        self.prox.evaluate(z, delta)
    }

    pub fn take_prox_warnings(&mut self) -> Vec<String> {
        self.prox.take_warnings()
    }

    pub fn feasible_start(&self) -> &[f64] {
        &self.feasible_start
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        (self.feasibility)(x)
    }

    pub fn statres_support(&self) -> Option<&StatresSupport> {
        self.statres_support.as_ref()
    }
}

/// `phi(x, u; delta) = g(x) + h(x) + ||x - u||^2 / (2 delta)` for feasible `x`
/// (the indicator term is zero there; infeasible `x` is an error).
pub fn phi(problem: &FractionalProblem, x: &[f64], u: &[f64], delta: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Err(Error::InvalidArgument("phi needs delta > 0".into()));
    }
    if !problem.is_feasible(x) {
        return Err(Error::model("phi evaluated at an infeasible point"));
    }
    let num = problem.numerator(x);
    if num < NUMERATOR_FLOOR {
        return Err(Error::model(format!("negative numerator g + h = {num}")));
    }
    Ok(num + linalg::dist(x, u).powi(2) / (2.0 * delta))
}

/// Merit values with `Kx` already computed; shared by [`theta`] and the solver.
pub(crate) fn merit_with_kx(
    problem: &FractionalProblem,
    x: &[f64],
    u: &[f64],
    delta: f64,
    kx: &[f64],
) -> Result<MeritValue> {
    let phi_value = phi(problem, x, u, delta)?;
    let f_at_kx = problem.f(kx);
    if f_at_kx <= DENOMINATOR_FLOOR {
        return Err(Error::model(format!(
            "denominator f(Kx) = {f_at_kx} is not positive"
        )));
    }
    Ok(MeritValue {
        phi: phi_value,
        theta: phi_value / f_at_kx,
        f_at_kx,
    })
}

/// `theta(x, u; delta) = phi(x, u; delta) / f(Kx)`.
pub fn theta(problem: &FractionalProblem, x: &[f64], u: &[f64], delta: f64) -> Result<MeritValue> {
    let kx = problem.k_op().apply(x);
    merit_with_kx(problem, x, u, delta, &kx)
}

fn check_box(lo: &[f64], hi: &[f64]) -> Result<()> {
    for (i, (&l, &h)) in lo.iter().zip(hi).enumerate() {
        if l > h {
            return Err(Error::Infeasible(format!("empty box at coordinate {i}")));
        }
    }
    Ok(())
}

fn box_feasibility(lo: Vec<f64>, hi: Vec<f64>) -> PredicateFn {
    Box::new(move |x: &[f64]| {
        x.len() == lo.len()
            && x.iter()
                .zip(lo.iter().zip(&hi))
                .all(|(&v, (&l, &h))| v >= l - 1e-9 && v <= h + 1e-9)
    })
}

fn capped_simplex_feasibility(caps: Option<Vec<f64>>, n: usize) -> PredicateFn {
    Box::new(move |x: &[f64]| {
        if x.len() != n {
            return false;
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return false;
        }
        x.iter().enumerate().all(|(i, &v)| {
            let cap = caps.as_ref().map_or(f64::INFINITY, |c| c[i]);
            v >= -1e-9 && v <= cap + 1e-9
        })
    })
}

struct L1BoxProx {
    lambda: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ConstrainedProx for L1BoxProx {
    fn evaluate(&mut self, z: &[f64], delta: f64) -> Result<Vec<f64>> {
        prox::prox_l1_box(z, self.lambda * delta, &self.lo, &self.hi)
    }
}

struct SimplexBoxProx {
    caps: Vec<f64>,
}

impl ConstrainedProx for SimplexBoxProx {
    fn evaluate(&mut self, z: &[f64], _delta: f64) -> Result<Vec<f64>> {
        prox::project_simplex_box(z, &self.caps)
    }
}

struct SimplexProx;

impl ConstrainedProx for SimplexProx {
    fn evaluate(&mut self, z: &[f64], _delta: f64) -> Result<Vec<f64>> {
        Ok(prox::project_simplex(z))
    }
}

/// TV prox backed by warm-started ADMM sweeps. The returned point is clamped
/// into the box so iterates stay feasible even though the inner solve is
/// approximate.
struct TvAdmmProx {
    lambda: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    grad: Grad2d,
    cfg: AdmmConfig,
    state: Option<AdmmState>,
    cg_exhausted_seen: usize,
    warnings: Vec<String>,
}

impl ConstrainedProx for TvAdmmProx {
    fn evaluate(&mut self, z: &[f64], delta: f64) -> Result<Vec<f64>> {
        let (x, state) = tv_prox_admm(
            z,
            self.lambda,
            delta,
            &self.lo,
            &self.hi,
            &self.grad,
            &self.cfg,
            self.state.take(),
        )?;
        if state.cg_exhausted > self.cg_exhausted_seen {
            self.warnings.push(format!(
                "inner cg hit its iteration cap ({} times so far)",
                state.cg_exhausted
            ));
            self.cg_exhausted_seen = state.cg_exhausted;
        }
        self.state = Some(state);
        Ok(linalg::clamp_slice(&x, &self.lo, &self.hi))
    }

    fn take_warnings(&mut self) -> Vec<String> {
        std::mem::take(&mut self.warnings)
    }
}

/// Sparse recovery with an L1 numerator over the largest-k norm:
/// `h = 0.5 ||Ax - b||^2`, `g = lambda ||x||_1`, `f` the largest-k norm,
/// `K = I`, `S = [lo, hi]`.
pub fn make_l1_sk(
    a: DenseMatrix,
    b: Vec<f64>,
    lambda: f64,
    kappa: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
) -> Result<FractionalProblem> {
    let n = a.cols();
    if kappa == 0 || kappa > n {
        return Err(Error::InvalidArgument(format!(
            "kappa must lie in [1, {n}], got {kappa}"
        )));
    }
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            got: b.len(),
            context: "observation length must match matrix rows",
        });
    }
    if lo.len() != n || hi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: lo.len().min(hi.len()),
            context: "box bounds must match the signal dimension",
        });
    }
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be nonnegative".into()));
    }
    check_box(&lo, &hi)?;

    let a = Arc::new(a);
    let lipschitz = a.norm_estimate() * a.norm_estimate();

    let h_a = Arc::clone(&a);
    let b_h = b.clone();
    let h_value: ScalarFn = Box::new(move |x: &[f64]| {
        let r = linalg::sub(&h_a.apply(x), &b_h);
        0.5 * linalg::dot(&r, &r)
    });
    let g_a = Arc::clone(&a);
    let b_g = b;
    let h_gradient: VectorFn = Box::new(move |x: &[f64]| {
        let r = linalg::sub(&g_a.apply(x), &b_g);
        g_a.adjoint(&r)
    });

    let g_value: ScalarFn = Box::new(move |x: &[f64]| lambda * linalg::norm1(x));
    let f_value: ScalarFn =
        Box::new(move |w: &[f64]| prox::topk_norm(w, kappa).expect("kappa validated"));
    let f_subgradient: VectorFn =
        Box::new(move |w: &[f64]| prox::topk_subgradient(w, kappa).expect("kappa validated"));

    // Per-coordinate subdifferential intervals of lambda |.| plus the box
    // normal cone, for the stationarity residual.
    let (lo_s, hi_s) = (lo.clone(), hi.clone());
    let statres_support = StatresSupport::Separable(Box::new(move |x: &[f64]| {
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                let sub = if v > 0.0 {
                    Interval::point(lambda)
                } else if v < 0.0 {
                    Interval::point(-lambda)
                } else {
                    Interval::new(-lambda, lambda)
                };
                let tol_lo = 1e-12 * (1.0 + lo_s[i].abs());
                let tol_hi = 1e-12 * (1.0 + hi_s[i].abs());
                let ncone_lo = if v <= lo_s[i] + tol_lo { f64::NEG_INFINITY } else { 0.0 };
                let ncone_hi = if v >= hi_s[i] - tol_hi { f64::INFINITY } else { 0.0 };
                sub.plus(&Interval::new(ncone_lo, ncone_hi))
            })
            .collect()
    }));

    // Nonzero feasible point: the all-0.5 vector clipped into the box keeps
    // the largest-k denominator positive.
    let feasible_start = linalg::clamp_slice(&vec![0.5; n], &lo, &hi);

    Ok(FractionalProblem {
        family: "l1sk",
        dim: n,
        k_op: Arc::new(Identity::new(n)),
        h_value,
        h_gradient,
        lipschitz_grad_h: Some(lipschitz),
        g_value,
        f_value,
        f_subgradient,
        prox: Box::new(L1BoxProx { lambda, lo: lo.clone(), hi: hi.clone() }),
        feasible_start,
        feasibility: box_feasibility(lo, hi),
        statres_support: Some(statres_support),
    })
}

/// TV-regularized CT reconstruction: `h = 0.5 ||Ax - b||^2`,
/// `g = lambda ||Gx||_1`, `f` the Euclidean norm of the stacked gradient
/// field, `K = G`, `S = [lo, hi]`.
///
/// The box is allowed to contain constant images, but the denominator
/// `||Gx||` vanishes there; the start point must avoid them and the merit
/// evaluation raises a model violation if an iterate ever reaches one.
pub fn make_ct(
    a: Arc<dyn LinearOperator>,
    b: Vec<f64>,
    lambda: f64,
    side: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    admm_cfg: AdmmConfig,
) -> Result<FractionalProblem> {
    let n = side * side;
    if a.input_dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.input_dim(),
            context: "projection operator must act on side^2 pixels",
        });
    }
    if b.len() != a.output_dim() {
        return Err(Error::DimensionMismatch {
            expected: a.output_dim(),
            got: b.len(),
            context: "sinogram length must match operator rows",
        });
    }
    if lo.len() != n || hi.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: lo.len().min(hi.len()),
            context: "box bounds must match the pixel count",
        });
    }
    if lambda < 0.0 {
        return Err(Error::InvalidArgument("lambda must be nonnegative".into()));
    }
    check_box(&lo, &hi)?;
    admm_cfg.validate()?;

    let grad = Grad2d::new(side)?;
    let lipschitz = a.norm_estimate() * a.norm_estimate();

    let h_a = Arc::clone(&a);
    let b_h = b.clone();
    let h_value: ScalarFn = Box::new(move |x: &[f64]| {
        let r = linalg::sub(&h_a.apply(x), &b_h);
        0.5 * linalg::dot(&r, &r)
    });
    let g_a = Arc::clone(&a);
    let h_gradient: VectorFn = Box::new(move |x: &[f64]| {
        let r = linalg::sub(&g_a.apply(x), &b);
        g_a.adjoint(&r)
    });

    let grad_for_g = grad.clone();
    let g_value: ScalarFn =
        Box::new(move |x: &[f64]| lambda * linalg::norm1(&grad_for_g.apply(x)));
    let f_value: ScalarFn = Box::new(|w: &[f64]| linalg::norm(w));
    let f_subgradient: VectorFn = Box::new(|w: &[f64]| prox::l2_subgradient(w));

    // Near-zero start: the zero image has a vanishing denominator, so one
    // interior pixel is nudged off the floor of the box.
    let mut feasible_start = linalg::clamp_slice(&vec![0.0; n], &lo, &hi);
    let center = (side / 2) * side + side / 2;
    let bump = feasible_start[center] + 0.01 * (hi[center] - lo[center]);
    feasible_start[center] = bump.max(lo[center]).min(hi[center]);
    let f_start = linalg::norm(&grad.apply(&feasible_start));
    if f_start <= DENOMINATOR_FLOOR {
        return Err(Error::model(
            "the box admits no start with a positive denominator (constant images only)",
        ));
    }

    Ok(FractionalProblem {
        family: "ct",
        dim: n,
        k_op: Arc::new(grad.clone()),
        h_value,
        h_gradient,
        lipschitz_grad_h: Some(lipschitz),
        g_value,
        f_value,
        f_subgradient,
        prox: Box::new(TvAdmmProx {
            lambda,
            lo: lo.clone(),
            hi: hi.clone(),
            grad,
            cfg: admm_cfg,
            state: None,
            cg_exhausted_seen: 0,
            warnings: Vec::new(),
        }),
        feasible_start,
        feasibility: box_feasibility(lo, hi),
        // The subdifferential of lambda ||G .||_1 plus the box normal cone is
        // not coordinate separable through G, so no residual support here.
        statres_support: None,
    })
}

/// Single-period portfolio selection: minimize `x^T V x / mu^T x` over the
/// capped simplex, with `V = diag(sigma) + L L^T` applied matrix free.
pub fn make_portfolio(
    sigma_diag: Vec<f64>,
    l_factors: Option<DenseMatrix>,
    mu: Vec<f64>,
    d: Vec<f64>,
) -> Result<FractionalProblem> {
    let n = sigma_diag.len();
    if n == 0 {
        return Err(Error::InvalidArgument("portfolio dimension must be positive".into()));
    }
    if sigma_diag.iter().any(|&s| s <= 0.0) {
        return Err(Error::InvalidArgument(
            "sigma diagonal must be strictly positive".into(),
        ));
    }
    if mu.len() != n || d.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: mu.len().min(d.len()),
            context: "mu and d must match the dimension",
        });
    }
    if mu.iter().any(|&m| m <= 0.0) {
        return Err(Error::InvalidArgument(
            "mu must be strictly positive so the denominator stays positive".into(),
        ));
    }
    if d.iter().any(|&di| di < 0.0) || d.iter().sum::<f64>() < 1.0 {
        return Err(Error::Infeasible(
            "caps must be nonnegative and sum to at least 1".into(),
        ));
    }
    if let Some(l) = &l_factors {
        if l.rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: l.rows(),
                context: "factor matrix must have n rows",
            });
        }
    }

    let sigma = Arc::new(sigma_diag);
    let factors = l_factors.map(Arc::new);

    let sigma_v = Arc::clone(&sigma);
    let factors_v = factors.clone();
    let apply_v = move |x: &[f64]| -> Vec<f64> {
        let mut out: Vec<f64> = sigma_v.iter().zip(x).map(|(s, xi)| s * xi).collect();
        if let Some(l) = &factors_v {
            let lt_x = l.adjoint(x);
            let llt_x = l.apply(&lt_x);
            for (o, v) in out.iter_mut().zip(&llt_x) {
                *o += v;
            }
        }
        out
    };

    let apply_for_h = apply_v.clone();
    let h_value: ScalarFn = Box::new(move |x: &[f64]| linalg::dot(x, &apply_for_h(x)));
    let apply_for_grad = apply_v.clone();
    let h_gradient: VectorFn = Box::new(move |x: &[f64]| {
        let mut vx = apply_for_grad(x);
        for v in &mut vx {
            *v *= 2.0;
        }
        vx
    });

    let lambda_max = crate::operators::power_iteration_lambda_max(n, &apply_v, 200, 1e-10);
    let lipschitz = 2.0 * lambda_max * (1.0 + 1e-7);

    let feasible_start = prox::project_simplex_box(&vec![1.0 / n as f64; n], &d)?;

    Ok(FractionalProblem {
        family: "portfolio",
        dim: n,
        k_op: Arc::new(RowVector::new(mu)?),
        h_value,
        h_gradient,
        lipschitz_grad_h: Some(lipschitz),
        g_value: Box::new(|_| 0.0),
        f_value: Box::new(|w: &[f64]| w[0]),
        f_subgradient: Box::new(|_w: &[f64]| vec![1.0]),
        prox: Box::new(SimplexBoxProx { caps: d.clone() }),
        feasible_start,
        feasibility: capped_simplex_feasibility(Some(d.clone()), n),
        statres_support: Some(StatresSupport::LinearConstraint { caps: Some(d) }),
    })
}

/// Sharpe-ratio minimization: `h = r - a^T x` (linear, so the gradient
/// Lipschitz constant is zero), `f` the Euclidean norm, `K` the Cholesky
/// factor of the covariance, `S` the probability simplex.
pub fn make_sharpe(a_coeff: Vec<f64>, r: f64, k_chol: DenseMatrix) -> Result<FractionalProblem> {
    let n = a_coeff.len();
    if n == 0 {
        return Err(Error::InvalidArgument("sharpe dimension must be positive".into()));
    }
    if k_chol.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: k_chol.cols(),
            context: "cholesky factor must have n columns",
        });
    }

    let feasible_start = vec![1.0 / n as f64; n];
    let start_num = r - linalg::dot(&a_coeff, &feasible_start);
    if start_num < 0.0 {
        return Err(Error::model(format!(
            "numerator r - a^T x = {start_num} is negative at the start point"
        )));
    }

    let a_h = a_coeff.clone();
    let h_value: ScalarFn = Box::new(move |x: &[f64]| r - linalg::dot(&a_h, x));
    let a_g = a_coeff;
    let h_gradient: VectorFn = Box::new(move |_x: &[f64]| a_g.iter().map(|v| -v).collect());

    Ok(FractionalProblem {
        family: "sharpe",
        dim: n,
        k_op: Arc::new(k_chol),
        h_value,
        h_gradient,
        lipschitz_grad_h: Some(0.0),
        g_value: Box::new(|_| 0.0),
        f_value: Box::new(|w: &[f64]| linalg::norm(w)),
        f_subgradient: Box::new(|w: &[f64]| prox::l2_subgradient(w)),
        prox: Box::new(SimplexProx),
        feasible_start,
        feasibility: capped_simplex_feasibility(None, n),
        statres_support: Some(StatresSupport::LinearConstraint { caps: None }),
    })
}
