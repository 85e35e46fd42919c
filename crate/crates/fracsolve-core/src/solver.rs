//! The single-loop proximal subgradient iteration with a relaxation step,
//! in a fixed-step variant and a nonmonotone line-search variant.
//!
//! One iteration of the fixed-step scheme, from `(x^k, u^k, theta_k)`:
//!
//! ```text
//!     y^{k+1}  in  df(K x^k)                                  (subgradient selector)
//!     x^{k+1}  =   prox_S( u^k - delta grad_h(x^k) + theta_k delta K^T y^{k+1}, delta )
//!     u^{k+1}  =   (1 - sigma) u^k + sigma x^{k+1}            (relaxation, 0 < sigma < 2)
//!     theta_{k+1} = phi(x^{k+1}, u^{k+1}; delta) / f(K x^{k+1})
//! ```
//!
//! The line-search variant replaces the fixed `delta` by a damped
//! Barzilai-Borwein seed shrunk geometrically until the candidate satisfies a
//! nonmonotone sufficient-decrease test against the largest of the last few
//! merit values; its merit uses the pre-update `u^k`.
//!
//! Both variants record a per-iteration trace including the Fenchel-Young
//! diagnostic `nu^{k+1} = f(Kx^k) + <y^{k+1}, K(x^{k+1} - x^k)>`, which never
//! exceeds `f(Kx^{k+1})` and whose ratio to `f(Kx^k)` tends to one.

use std::path::Path;
use std::time::Instant;

use crate::linalg;
use crate::problem::{merit_with_kx, theta, FractionalProblem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Fixed,
    LineSearch,
}

/// All tunables of the two solver variants.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mode: SolverMode,
    /// Step size for fixed mode; must satisfy `delta < 1 / L_grad_h` unless
    /// the guard is overridden.
    pub delta: f64,
    /// Relaxation weight, in (0, 2).
    pub sigma: f64,
    /// Sufficient-decrease weight in the line-search acceptance test.
    pub rho1: f64,
    /// Geometric backtracking factor, in (0, 1).
    pub q: f64,
    /// Nonmonotone window length (number of trailing merit values).
    pub window: usize,
    /// Maximum backtracking trials per outer iteration.
    pub max_backtracks: usize,
    /// Damping applied to the Barzilai-Borwein step seed, in (0, 1].
    pub bb_damping: f64,
    /// Relative step tolerance of the stopping rule.
    pub tol: f64,
    pub max_iter: usize,
    /// Safeguard clamps for the line-search step seed.
    pub delta_min: f64,
    pub delta_max: f64,
    /// Allow fixed-mode steps beyond `1 / L_grad_h`.
    pub override_delta_guard: bool,
    /// Record the stationarity residual in the trace (costly; off by default).
    pub trace_statres: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: SolverMode::LineSearch,
            delta: 1e-3,
            sigma: 1.0,
            rho1: 1e-3,
            q: 0.95,
            window: 5,
            max_backtracks: 250,
            bb_damping: 0.8,
            tol: 1e-6,
            max_iter: 5000,
            delta_min: 1e-12,
            delta_max: 1e6,
            override_delta_guard: false,
            trace_statres: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 2.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must lie in (0, 2), got {}",
                self.sigma
            )));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "q must lie in (0, 1), got {}",
                self.q
            )));
        }
        if !(self.bb_damping > 0.0 && self.bb_damping <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "bb damping must lie in (0, 1], got {}",
                self.bb_damping
            )));
        }
        if self.delta <= 0.0 || self.rho1 <= 0.0 || self.tol <= 0.0 {
            return Err(Error::InvalidArgument(
                "delta, rho1, and tol must be positive".into(),
            ));
        }
        if self.delta_min <= 0.0 || self.delta_min > self.delta_max {
            return Err(Error::InvalidArgument(
                "need 0 < delta_min <= delta_max".into(),
            ));
        }
        if self.window == 0 || self.max_backtracks == 0 || self.max_iter == 0 {
            return Err(Error::InvalidArgument(
                "window, backtrack, and iteration counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Live iterate tuple of one solver run.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub theta: f64,
    pub k: usize,
}

/// Numbers produced by one accepted iteration, for the trace and invariants.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    /// `f(K x^k)` at the pre-step iterate.
    pub f_kx_prev: f64,
    /// `f(K x^{k+1})`.
    pub f_kx_new: f64,
    /// Merit numerator at the new iterate.
    pub phi_new: f64,
    /// Fenchel-Young surrogate `nu^{k+1}`.
    pub nu: f64,
    pub step_norm: f64,
    pub u_step_norm: f64,
}

/// One per-iteration trace record (CSV schema below).
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub k: usize,
    pub theta: f64,
    pub phi: f64,
    pub f_kx: f64,
    pub nu: f64,
    pub delta: f64,
    pub backtracks: usize,
    pub step_norm: f64,
    pub u_step_norm: f64,
    pub statres: Option<f64>,
    pub wall_ms: f64,
}

/// Per-iteration records plus the starting merit values needed to replay
/// ratio diagnostics from the first step.
#[derive(Debug, Clone, Default)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
    pub theta0: f64,
    pub f_kx0: f64,
}

impl IterationTrace {
    pub const CSV_HEADER: &'static str =
        "k,theta,phi,f_kx,nu,delta,backtracks,step_norm,u_step_norm,statres,wall_ms";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let statres = r
                .statres
                .map(|v| format!("{v}"))
                .unwrap_or_else(|| "NA".into());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.k,
                r.theta,
                r.phi,
                r.f_kx,
                r.nu,
                r.delta,
                r.backtracks,
                r.step_norm,
                r.u_step_norm,
                statres,
                r.wall_ms
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Outcome of a solver run.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x_final: Vec<f64>,
    pub theta_final: f64,
    pub iterations: usize,
    /// True only when the relative-step criterion fired before the iteration
    /// cap.
    pub converged: bool,
    pub trace: IterationTrace,
    pub warnings: Vec<String>,
}

/// Stopping rule: relative step below `tol`, or the iteration budget spent.
pub fn stop_check(x_new: &[f64], x_old: &[f64], tol: f64, k: usize, max_iter: usize) -> bool {
    relative_step(x_new, x_old) < tol || k > max_iter
}

fn relative_step(x_new: &[f64], x_old: &[f64]) -> f64 {
    linalg::dist(x_new, x_old) / linalg::norm(x_old).max(f64::EPSILON)
}

/// Step-size seed for the line search: a norm ratio at the start, then a
/// damped Barzilai-Borwein quotient, clamped into `[delta_min, delta_max]`.
/// `x_prev`/`grad_prev` are `None` exactly at iteration zero.
pub fn initial_delta(
    x_k: &[f64],
    x_prev: Option<&[f64]>,
    grad_k: &[f64],
    grad_prev: Option<&[f64]>,
    bb_damping: f64,
    delta_min: f64,
    delta_max: f64,
) -> f64 {
    let raw = match (x_prev, grad_prev) {
        (Some(xp), Some(gp)) => {
            bb_damping * linalg::dist(x_k, xp) / linalg::dist(grad_k, gp).max(f64::EPSILON)
        }
        _ => linalg::norm(x_k) / linalg::norm(grad_k).max(f64::EPSILON),
    };
    raw.clamp(delta_min, delta_max)
}

/// Largest of the trailing merit values `theta_s` for
/// `max(k - window, 0) < s <= k`; at `k = 0` the window is the starting value
/// itself.
pub fn nonmonotone_window_max(history: &[f64], k: usize, window: usize) -> f64 {
    debug_assert_eq!(history.len(), k + 1);
    if k == 0 {
        return history[0];
    }
    let lo = k.saturating_sub(window) + 1;
    history[lo..=k]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// One fixed-step iteration; mutates `state` in place and reports the step
/// diagnostics.
pub fn fpsa_step(
    problem: &mut FractionalProblem,
    state: &mut SolverState,
    delta: f64,
    sigma: f64,
) -> Result<StepStats> {
    let kx = problem.k_op().apply(&state.x);
    let y = problem.f_subgradient(&kx);
    let f_prev = problem.f(&kx);
    let grad = problem.grad_h(&state.x);
    let kty = problem.k_op().adjoint(&y);

    let z: Vec<f64> = (0..state.x.len())
        .map(|i| state.u[i] - delta * grad[i] + state.theta * delta * kty[i])
        .collect();
    let x_new = problem.constrained_prox(&z, delta)?;

    let u_new: Vec<f64> = state
        .u
        .iter()
        .zip(&x_new)
        .map(|(&u, &x)| (1.0 - sigma) * u + sigma * x)
        .collect();

    let kx_new = problem.k_op().apply(&x_new);
    let merit = merit_with_kx(problem, &x_new, &u_new, delta, &kx_new)?;
    let nu = f_prev + linalg::dot(&y, &kx_new) - linalg::dot(&y, &kx);

    let stats = StepStats {
        f_kx_prev: f_prev,
        f_kx_new: merit.f_at_kx,
        phi_new: merit.phi,
        nu,
        step_norm: linalg::dist(&x_new, &state.x),
        u_step_norm: linalg::dist(&u_new, &state.u),
    };
    state.x = x_new;
    state.u = u_new;
    state.y = y;
    state.theta = merit.theta;
    state.k += 1;
    Ok(stats)
}

fn trace_statres_value(problem: &FractionalProblem, x: &[f64], enabled: bool) -> Option<f64> {
    if !enabled {
        return None;
    }
    crate::metrics::statres(problem, x).ok()
}

/// Run the fixed-step variant from `x0` (which must be feasible).
pub fn solve_fixed(
    problem: &mut FractionalProblem,
    config: &SolverConfig,
    x0: &[f64],
) -> Result<SolveResult> {
    config.validate()?;
    if !problem.is_feasible(x0) {
        return Err(Error::model("fixed-mode start point is infeasible"));
    }
    if let Some(l) = problem.lipschitz_grad_h() {
        if l > 0.0 && config.delta >= 1.0 / l && !config.override_delta_guard {
            return Err(Error::InvalidArgument(format!(
                "delta = {} violates the descent guard delta < 1/L = {}; \
                 set override_delta_guard to proceed",
                config.delta,
                1.0 / l
            )));
        }
    }

    let start_merit = theta(problem, x0, x0, config.delta)?;
    let mut state = SolverState {
        x: x0.to_vec(),
        y: vec![0.0; problem.k_op().output_dim()],
        u: x0.to_vec(),
        theta: start_merit.theta,
        k: 0,
    };
    let mut trace = IterationTrace {
        theta0: start_merit.theta,
        f_kx0: start_merit.f_at_kx,
        ..IterationTrace::default()
    };
    let mut converged = false;
    let mut warnings = Vec::new();

    for k in 0..config.max_iter {
        let t0 = Instant::now();
        let x_old = state.x.clone();
        let stats = fpsa_step(problem, &mut state, config.delta, config.sigma)
            .map_err(|e| e.at_iteration(k))?;
        warnings.extend(problem.take_prox_warnings());
        trace.records.push(TraceRecord {
            k,
            theta: state.theta,
            phi: stats.phi_new,
            f_kx: stats.f_kx_new,
            nu: stats.nu,
            delta: config.delta,
            backtracks: 0,
            step_norm: stats.step_norm,
            u_step_norm: stats.u_step_norm,
            statres: trace_statres_value(problem, &state.x, config.trace_statres),
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        });
        if stop_check(&state.x, &x_old, config.tol, k + 1, config.max_iter) {
            converged = relative_step(&state.x, &x_old) < config.tol;
            break;
        }
    }

    Ok(SolveResult {
        theta_final: state.theta,
        iterations: trace.records.len(),
        converged,
        x_final: state.x,
        trace,
        warnings,
    })
}

/// Run the nonmonotone line-search variant from `x0` (which must be feasible).
pub fn solve_linesearch(
    problem: &mut FractionalProblem,
    config: &SolverConfig,
    x0: &[f64],
) -> Result<SolveResult> {
    config.validate()?;
    if !problem.is_feasible(x0) {
        return Err(Error::model("line-search start point is infeasible"));
    }

    // theta_0 = (g + h)(x0) / f(K x0); with u = x0 the proximity term is zero
    // for any delta.
    let start_merit = theta(problem, x0, x0, 1.0)?;
    let mut theta_hist = vec![start_merit.theta];
    let mut x = x0.to_vec();
    let mut u = x0.to_vec();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None; // (x^{k-1}, grad_h(x^{k-1}))

    let mut trace = IterationTrace {
        theta0: start_merit.theta,
        f_kx0: start_merit.f_at_kx,
        ..IterationTrace::default()
    };
    let mut converged = false;
    let mut warnings = Vec::new();

    for k in 0..config.max_iter {
        let t0 = Instant::now();
        let grad = problem.grad_h(&x);
        let delta0 = initial_delta(
            &x,
            prev.as_ref().map(|(xp, _)| xp.as_slice()),
            &grad,
            prev.as_ref().map(|(_, gp)| gp.as_slice()),
            config.bb_damping,
            config.delta_min,
            config.delta_max,
        );
        let kx = problem.k_op().apply(&x);
        let y = problem.f_subgradient(&kx);
        let f_prev = problem.f(&kx);
        let kty = problem.k_op().adjoint(&y);
        let theta_k = *theta_hist.last().expect("history is never empty");
        let window_max = nonmonotone_window_max(&theta_hist, k, config.window);

        // Candidate tuple: (x_new, merit, K x_new, delta used, rejected trials).
        type Candidate = (Vec<f64>, crate::problem::MeritValue, Vec<f64>, f64);
        let mut accepted: Option<(Candidate, usize)> = None;
        let mut last_candidate: Option<Candidate> = None;
        for j in 1..=config.max_backtracks {
            let delta_kj = delta0 * config.q.powi(j as i32 - 1);
            let z: Vec<f64> = (0..x.len())
                .map(|i| u[i] - delta_kj * grad[i] + theta_k * delta_kj * kty[i])
                .collect();
            let cand = problem.constrained_prox(&z, delta_kj)?;
            let kx_cand = problem.k_op().apply(&cand);
            let merit = merit_with_kx(problem, &cand, &u, delta_kj, &kx_cand)
                .map_err(|e| e.at_iteration(k))?;
            let step_sq = linalg::dist(&cand, &x).powi(2);
            if merit.theta < window_max - config.rho1 * step_sq {
                accepted = Some(((cand, merit, kx_cand, delta_kj), j - 1));
                break;
            }
            last_candidate = Some((cand, merit, kx_cand, delta_kj));
        }

        let ((x_new, merit, kx_new, delta_used), backtracks) = match accepted {
            Some(t) => t,
            None => {
                let cand = last_candidate.expect("at least one trial ran");
                warnings.push(format!(
                    "iteration {k}: line search exhausted {} trials; accepted the smallest-step candidate",
                    config.max_backtracks
                ));
                (cand, config.max_backtracks)
            }
        };
        warnings.extend(problem.take_prox_warnings());

        let nu = f_prev + linalg::dot(&y, &kx_new) - linalg::dot(&y, &kx);
        let u_new: Vec<f64> = u
            .iter()
            .zip(&x_new)
            .map(|(&ui, &xi)| (1.0 - config.sigma) * ui + config.sigma * xi)
            .collect();

        trace.records.push(TraceRecord {
            k,
            theta: merit.theta,
            phi: merit.phi,
            f_kx: merit.f_at_kx,
            nu,
            delta: delta_used,
            backtracks,
            step_norm: linalg::dist(&x_new, &x),
            u_step_norm: linalg::dist(&u_new, &u),
            statres: trace_statres_value(problem, &x_new, config.trace_statres),
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        });

        theta_hist.push(merit.theta);
        let x_old = std::mem::replace(&mut x, x_new);
        prev = Some((x_old.clone(), grad));
        u = u_new;

        if stop_check(&x, &x_old, config.tol, k + 1, config.max_iter) {
            converged = relative_step(&x, &x_old) < config.tol;
            break;
        }
    }

    Ok(SolveResult {
        theta_final: *theta_hist.last().expect("history is never empty"),
        iterations: trace.records.len(),
        converged,
        x_final: x,
        trace,
        warnings,
    })
}
