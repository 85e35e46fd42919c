//! Acceptance suite: one test per shipped guarantee, each printing a PASS
//! line on success. Run with `cargo test -p fracsolve-cli --test acceptance`.

use std::time::Instant;

use fracsolve_cli::commands::{build_problem, generate_dataset, run_bench, solve_once, Dataset};
use fracsolve_cli::config::{preset, DataParams, ExperimentSpec};
use fracsolve_core::admm::{tv_prox_admm, tv_prox_objective, AdmmConfig};
use fracsolve_core::linalg;
use fracsolve_core::metrics;
use fracsolve_core::operators::{
    adjoint_discrepancy, mini_radon, DenseMatrix, Grad2d, Identity, Image2D, LinearOperator,
    RowVector,
};
use fracsolve_core::problem::FractionalProblem;
use fracsolve_core::prox;
use fracsolve_core::rng::Rng;
use fracsolve_core::solver::{solve_fixed, solve_linesearch, SolveResult, SolverConfig, SolverMode};

const THETA_DESCENT_TOL: f64 = 1e-10;
const QUANTIFIED_DESCENT_TOL: f64 = 1e-9;
const FENCHEL_YOUNG_TOL: f64 = 1e-10;
const NU_RATIO_TOL: f64 = 1e-3;

fn pass(criterion: usize, name: &str) {
    println!("[acceptance] criterion {criterion} ({name}): PASS");
}

// ---------------------------------------------------------------------------
// Desk-scale configurations shared by several criteria.
// ---------------------------------------------------------------------------

fn desk_l1sk_spec() -> ExperimentSpec {
    let mut spec = preset("l1sk").unwrap();
    if let DataParams::L1Sk { n, .. } = &mut spec.data {
        *n = 256;
    }
    spec.seed = 1;
    spec
}

fn desk_ct_spec() -> ExperimentSpec {
    let mut spec = preset("ct").unwrap();
    if let DataParams::Ct { side, rays, .. } = &mut spec.data {
        *side = 32;
        *rays = 46;
    }
    spec.seed = 1;
    spec
}

fn desk_portfolio_spec(n: usize, m: usize) -> ExperimentSpec {
    let mut spec = preset("portfolio").unwrap();
    if let DataParams::Portfolio { n: dn, m: dm } = &mut spec.data {
        *dn = n;
        *dm = m;
    }
    spec.seed = 1;
    spec
}

fn desk_sharpe_spec() -> ExperimentSpec {
    let mut spec = preset("sharpe").unwrap();
    spec.seed = 1;
    spec
}

/// Build the problem for a spec and run fixed-mode with `delta = 0.5 / L`
/// (clamped to `delta_max` when the Lipschitz constant is zero).
fn run_fixed_half_lipschitz(spec: &ExperimentSpec) -> (SolveResult, SolverConfig, f64) {
    let dataset = generate_dataset(spec, spec.seed).unwrap();
    let (mut problem, x0) = build_problem(&dataset, spec).unwrap();
    let lip = problem.lipschitz_grad_h().expect("all shipped instances know L");
    let mut config = spec.solver.clone();
    config.mode = SolverMode::Fixed;
    config.sigma = 1.0;
    config.delta = if lip > 0.0 {
        0.5 / lip
    } else {
        config.delta_max
    };
    let result = solve_fixed(&mut problem, &config, &x0).unwrap();
    (result, config, lip)
}

fn assert_theta_monotone(result: &SolveResult, label: &str) {
    let mut prev = result.trace.theta0;
    for r in &result.trace.records {
        assert!(
            r.theta <= prev + THETA_DESCENT_TOL,
            "{label}: theta rose from {prev} to {} at iteration {}",
            r.theta,
            r.k
        );
        prev = r.theta;
    }
}

// ---------------------------------------------------------------------------
// 1. Descent law on all four families at desk scale, fixed mode.
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_descent_law() {
    let start = Instant::now();

    let (result, _, _) = run_fixed_half_lipschitz(&desk_l1sk_spec());
    assert_theta_monotone(&result, "l1sk");

    // CT: delta = 1e-3 sits just inside 1/L for this geometry, but the guard
    // uses the inflated norm estimate, so it is overridden as specified. The
    // descent theorem assumes an exact proximal map; the inner splitting runs
    // to a tight residual so its error stays below the tolerance.
    let mut ct = desk_ct_spec();
    ct.solver.mode = SolverMode::Fixed;
    ct.solver.delta = 1e-3;
    ct.solver.sigma = 1.0;
    ct.solver.override_delta_guard = true;
    ct.admm = AdmmConfig {
        alpha: 50.0,
        beta: 50.0,
        max_outer: 600,
        cg_tol: 1e-12,
        cg_max: 500,
        outer_tol: 1e-8,
    };
    let dataset = generate_dataset(&ct, ct.seed).unwrap();
    let (mut problem, x0) = build_problem(&dataset, &ct).unwrap();
    let result = solve_fixed(&mut problem, &ct.solver, &x0).unwrap();
    assert_theta_monotone(&result, "ct");

    let (result, _, _) = run_fixed_half_lipschitz(&desk_portfolio_spec(50, 5));
    assert_theta_monotone(&result, "portfolio");

    // Sharpe has a linear h (L = 0), so any step size preserves descent; the
    // 0.5/L recipe degenerates and the safeguard cap is used instead.
    let (result, config, lip) = run_fixed_half_lipschitz(&desk_sharpe_spec());
    assert_eq!(lip, 0.0);
    assert_eq!(config.delta, config.delta_max);
    assert_theta_monotone(&result, "sharpe");

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "descent-law runs took {elapsed:.1} s");
    pass(1, "descent law");
}

// ---------------------------------------------------------------------------
// 2. Quantified descent with the theorem's constants.
// ---------------------------------------------------------------------------

fn assert_quantified_descent(result: &SolveResult, delta: f64, sigma: f64, lip: f64, label: &str) {
    let rho1 = (1.0 - delta * lip) / (2.0 * delta);
    let rho2 = (1.0 - (1.0 - sigma) * (1.0 - sigma)) / (2.0 * sigma * sigma * delta);
    let m_hat = result
        .trace
        .records
        .iter()
        .map(|r| r.f_kx)
        .fold(result.trace.f_kx0, f64::max);
    let mut prev = result.trace.theta0;
    for r in &result.trace.records {
        let decrease = (rho1 * r.step_norm * r.step_norm + rho2 * r.u_step_norm * r.u_step_norm)
            / m_hat;
        assert!(
            r.theta <= prev - decrease + QUANTIFIED_DESCENT_TOL,
            "{label}: quantified descent violated at iteration {} ({} !<= {} - {decrease})",
            r.k,
            r.theta,
            prev
        );
        prev = r.theta;
    }
}

#[test]
fn criterion_02_quantified_descent() {
    let (result, config, lip) = run_fixed_half_lipschitz(&desk_l1sk_spec());
    assert_quantified_descent(&result, config.delta, config.sigma, lip, "l1sk");

    let (result, config, lip) = run_fixed_half_lipschitz(&desk_portfolio_spec(50, 5));
    assert_quantified_descent(&result, config.delta, config.sigma, lip, "portfolio");
    pass(2, "quantified descent");
}

// ---------------------------------------------------------------------------
// 3. Fenchel-Young diagnostic along converged runs.
// ---------------------------------------------------------------------------

fn assert_fenchel_young(result: &SolveResult, label: &str) {
    assert!(result.converged, "{label}: run did not converge");
    let records = &result.trace.records;
    for r in records {
        assert!(
            r.nu <= r.f_kx + FENCHEL_YOUNG_TOL,
            "{label}: nu {} exceeds f(Kx) {} at iteration {}",
            r.nu,
            r.f_kx,
            r.k
        );
    }
    // nu stays positive over the back half of the run.
    for r in &records[records.len() / 2..] {
        assert!(r.nu > 0.0, "{label}: nu {} not positive at iteration {}", r.nu, r.k);
    }
    // The denominator ratio approaches one.
    let tail = records.len().saturating_sub(10);
    for (idx, r) in records.iter().enumerate().skip(tail) {
        let f_prev = if idx == 0 {
            result.trace.f_kx0
        } else {
            records[idx - 1].f_kx
        };
        let ratio = r.nu / f_prev;
        assert!(
            (ratio - 1.0).abs() < NU_RATIO_TOL,
            "{label}: ratio {ratio} at iteration {}",
            r.k
        );
    }
}

#[test]
fn criterion_03_fenchel_young_diagnostic() {
    // Fixed-mode desk runs.
    let (result, _, _) = run_fixed_half_lipschitz(&desk_l1sk_spec());
    assert_fenchel_young(&result, "l1sk fixed");
    let (result, _, _) = run_fixed_half_lipschitz(&desk_portfolio_spec(50, 5));
    assert_fenchel_young(&result, "portfolio fixed");

    // Sharpe has a linear h, so the 0.5/L step degenerates to the safeguard
    // cap and the run ends in two giant steps with no asymptotic tail to
    // measure. A moderate fixed step gives a genuine approach phase.
    let spec = desk_sharpe_spec();
    let dataset = generate_dataset(&spec, spec.seed).unwrap();
    let (mut problem, x0) = build_problem(&dataset, &spec).unwrap();
    let mut config = spec.solver.clone();
    config.mode = SolverMode::Fixed;
    config.sigma = 1.0;
    config.delta = 1e-3;
    config.tol = 1e-9;
    config.max_iter = 20_000;
    let result = solve_fixed(&mut problem, &config, &x0).unwrap();
    assert_fenchel_young(&result, "sharpe fixed");

    // Line-search desk runs, including CT with the shipped inner settings.
    // Sharpe's constant gradient drives the step seed to the safeguard cap
    // and the run ends in two giant steps; capping the step gives the
    // diagnostic an actual approach phase to measure.
    let mut sharpe = desk_sharpe_spec();
    sharpe.solver.delta_max = 1e-3;
    sharpe.solver.tol = 1e-9;
    sharpe.solver.max_iter = 20_000;
    for (label, spec) in [
        ("l1sk linesearch", desk_l1sk_spec()),
        ("ct linesearch", desk_ct_spec()),
        ("portfolio linesearch", desk_portfolio_spec(50, 5)),
        ("sharpe linesearch", sharpe),
    ] {
        let dataset = generate_dataset(&spec, spec.seed).unwrap();
        let (mut problem, x0) = build_problem(&dataset, &spec).unwrap();
        let result = solve_linesearch(&mut problem, &spec.solver, &x0).unwrap();
        assert_fenchel_young(&result, label);
    }
    pass(3, "Fenchel-Young diagnostic");
}

// ---------------------------------------------------------------------------
// 4. Line-search acceptance contract, replayed from the trace.
// ---------------------------------------------------------------------------

/// Independent replay of the nonmonotone window maximum: the largest theta_s
/// with max(k - T, 0) < s <= k, falling back to theta_0 at k = 0.
fn replay_window_max(history: &[f64], k: usize, window: usize) -> f64 {
    if k == 0 {
        return history[0];
    }
    let lo = k.saturating_sub(window) + 1;
    history[lo..=k].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn replay_trace(result: &SolveResult, config: &SolverConfig, label: &str) {
    let mut history = vec![result.trace.theta0];
    for r in &result.trace.records {
        if r.backtracks < config.max_backtracks {
            let wmax = replay_window_max(&history, r.k, config.window);
            assert!(
                r.theta < wmax - config.rho1 * r.step_norm * r.step_norm,
                "{label}: accepted step fails the window test at iteration {}",
                r.k
            );
        }
        history.push(r.theta);
    }
}

#[test]
fn criterion_04_linesearch_contract() {
    for (label, spec) in [
        ("l1sk", desk_l1sk_spec()),
        ("ct", desk_ct_spec()),
        ("portfolio", desk_portfolio_spec(50, 5)),
        ("sharpe", desk_sharpe_spec()),
    ] {
        let dataset = generate_dataset(&spec, spec.seed).unwrap();
        let (mut problem, x0) = build_problem(&dataset, &spec).unwrap();
        let result = solve_linesearch(&mut problem, &spec.solver, &x0).unwrap();
        replay_trace(&result, &spec.solver, label);
        if label == "portfolio" {
            let exhausted = result
                .trace
                .records
                .iter()
                .filter(|r| r.backtracks >= spec.solver.max_backtracks)
                .count();
            assert_eq!(exhausted, 0, "portfolio preset hit line-search exhaustion");
            assert!(result.warnings.is_empty(), "warnings: {:?}", result.warnings);
        }
    }
    pass(4, "line-search contract");
}

// ---------------------------------------------------------------------------
// 5. Portfolio quantitative reproduction.
// ---------------------------------------------------------------------------

const PORTFOLIO_REFERENCE: [(usize, f64, f64); 5] = [
    (1, 1.89e-2, 1.84e-8),
    (5, 1.93e-2, 1.20e-6),
    (20, 2.08e-2, 9.40e-6),
    (40, 2.36e-2, 8.49e-5),
    (50, 2.55e-2, 3.47e-4),
];

fn portfolio_bench_spec(m: usize) -> ExperimentSpec {
    let mut spec = desk_portfolio_spec(200, m);
    spec.repetitions = 20;
    spec.seed = 1;
    spec
}

#[test]
fn criterion_05_portfolio_reproduction() {
    let start = Instant::now();
    for (m, ref_obj, ref_statres) in PORTFOLIO_REFERENCE {
        let spec = portfolio_bench_spec(m);
        let rows = run_bench(&spec, 1).unwrap();
        let mean = rows.last().expect("mean row");
        assert_eq!(mean.seed, "mean");
        assert_eq!(mean.n_ok, 20, "m = {m}: failed repetitions");

        let obj = mean.obj_val.expect("portfolio emits obj_val");
        assert!(
            (obj - ref_obj).abs() <= 0.2 * ref_obj,
            "m = {m}: mean objective {obj} outside 20% of {ref_obj}"
        );
        let infeas = mean.infeas.expect("portfolio emits infeas");
        assert!(infeas <= 1e-8, "m = {m}: mean infeasibility {infeas}");
        let statres = mean.stat_res.expect("portfolio emits stat_res");
        assert!(
            statres <= 10.0 * ref_statres,
            "m = {m}: mean residual {statres} exceeds 10 x {ref_statres}"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "portfolio grid took {elapsed:.1} s");
    pass(5, "portfolio reproduction");
}

// ---------------------------------------------------------------------------
// 6. Oracle equivalences.
// ---------------------------------------------------------------------------

/// Enumerate all 3^n lower/free/upper patterns and keep the feasible
/// candidate closest to z.
fn simplex_box_oracle(z: &[f64], d: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for pattern in 0..3usize.pow(n as u32) {
        let mut states = Vec::with_capacity(n);
        let mut p = pattern;
        for _ in 0..n {
            states.push(p % 3);
            p /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| states[i] == 1).collect();
        let fixed_sum: f64 = (0..n).map(|i| if states[i] == 2 { d[i] } else { 0.0 }).sum();
        let mut x = vec![0.0; n];
        if free.is_empty() {
            if (fixed_sum - 1.0).abs() > 1e-9 {
                continue;
            }
            for i in 0..n {
                x[i] = if states[i] == 2 { d[i] } else { 0.0 };
            }
        } else {
            let eta =
                (free.iter().map(|&i| z[i]).sum::<f64>() + fixed_sum - 1.0) / free.len() as f64;
            for i in 0..n {
                x[i] = match states[i] {
                    0 => 0.0,
                    2 => d[i],
                    _ => z[i] - eta,
                };
            }
        }
        let feasible = x.iter().zip(d).all(|(&xi, &di)| (-1e-12..=di + 1e-12).contains(&xi))
            && (x.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if !feasible {
            continue;
        }
        let sq = linalg::dist(&x, z).powi(2);
        if best.as_ref().is_none_or(|(b, _)| sq < *b) {
            best = Some((sq, x));
        }
    }
    best.expect("feasible pattern exists").1
}

#[test]
fn criterion_06_oracle_equivalences() {
    // Capped-simplex projection vs exhaustive active-set enumeration.
    let mut rng = Rng::new(600, 0);
    let mut checked = 0;
    while checked < 200 {
        let n = 2 + checked % 3;
        let z = rng.uniform_vec(n, -2.0, 2.0);
        let d: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.3, 1.5)).collect();
        if d.iter().sum::<f64>() <= 1.0 + 1e-6 {
            continue;
        }
        let ours = prox::project_simplex_box(&z, &d).unwrap();
        let oracle = simplex_box_oracle(&z, &d);
        assert!(
            linalg::dist(&ours, &oracle) <= 1e-8,
            "projection mismatch on instance {checked}"
        );
        checked += 1;
    }

    // Largest-k norm vs subset brute force, all kappa, n = 8.
    let n = 8;
    for trial in 0..100 {
        let x = rng.uniform_vec(n, -2.0, 2.0);
        for kappa in 1..=n {
            let ours = prox::topk_norm(&x, kappa).unwrap();
            let mut best = f64::NEG_INFINITY;
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize != kappa {
                    continue;
                }
                let s: f64 = (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| x[i].abs())
                    .sum();
                best = best.max(s);
            }
            assert!(
                (ours - best).abs() <= 1e-12,
                "topk mismatch, trial {trial}, kappa {kappa}"
            );
        }
    }

    // Stationarity residual vs grid oracles (separable and linear-constraint).
    statres_separable_grid_check();
    statres_linear_constraint_grid_check();

    // TV prox vs a long-run projected subgradient oracle (objective value).
    let mut rng = Rng::new(601, 0);
    let z = rng.uniform_vec(16, -1.0, 1.0);
    let lo = vec![-1.0; 16];
    let hi = vec![1.0; 16];
    let grad = Grad2d::new(4).unwrap();
    let (lambda, delta) = (0.1, 1.0);
    let cfg = AdmmConfig {
        max_outer: 2000,
        beta: 0.5,
        outer_tol: 1e-11,
        ..AdmmConfig::default()
    };
    let (x, _) = tv_prox_admm(&z, lambda, delta, &lo, &hi, &grad, &cfg, None).unwrap();
    let ours = tv_prox_objective(&x, &z, lambda, delta, &grad);
    let mut best = f64::INFINITY;
    let mut xs = linalg::clamp_slice(&z, &lo, &hi);
    for t in 1..=100_000usize {
        let gx = grad.apply(&xs);
        let sign: Vec<f64> = gx
            .iter()
            .map(|&v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 })
            .collect();
        let mut g = grad.adjoint(&sign);
        for i in 0..xs.len() {
            g[i] = lambda * g[i] + (xs[i] - z[i]) / delta;
        }
        let step = 0.5 / (t as f64).sqrt();
        for i in 0..xs.len() {
            xs[i] = (xs[i] - step * g[i]).max(lo[i]).min(hi[i]);
        }
        best = best.min(tv_prox_objective(&xs, &z, lambda, delta, &grad));
    }
    assert!(
        (ours - best).abs() <= 1e-3,
        "tv prox objective {ours} vs subgradient oracle {best}"
    );
    pass(6, "oracle equivalences");
}

fn statres_separable_grid_check() {
    let mut rng = Rng::new(602, 0);
    let n = 3;
    let a = DenseMatrix::new(n, n, rng.uniform_vec(n * n, -1.0, 1.0)).unwrap();
    let b = rng.uniform_vec(n, -1.0, 1.0);
    let lambda = 0.5;
    let p = fracsolve_core::problem::make_l1_sk(a, b, lambda, 2, vec![-1.0; n], vec![1.0; n])
        .unwrap();
    for x in [vec![0.3, 0.0, -0.4], vec![0.0, 0.0, 0.5], vec![0.2, -0.1, 0.0]] {
        let ours = metrics::statres(&p, &x).unwrap();
        let kx = p.k_op().apply(&x);
        let f = p.f(&kx);
        let num = p.numerator(&x);
        let kty = p.k_op().adjoint(&p.f_subgradient(&kx));
        let grad = p.grad_h(&x);
        let per_coord: Vec<Vec<f64>> = x
            .iter()
            .map(|&v| {
                if v != 0.0 {
                    vec![lambda * v.signum()]
                } else {
                    let steps = (2.0 * lambda / 1e-3) as usize;
                    (0..=steps).map(|s| -lambda + s as f64 * 1e-3).collect()
                }
            })
            .collect();
        let mut best = f64::INFINITY;
        for s0 in &per_coord[0] {
            for s1 in &per_coord[1] {
                for s2 in &per_coord[2] {
                    let sq: f64 = [(*s0, 0usize), (*s1, 1), (*s2, 2)]
                        .iter()
                        .map(|&(s, i)| {
                            let v = f * (grad[i] + s) - num * kty[i];
                            v * v
                        })
                        .sum();
                    best = best.min(sq.sqrt());
                }
            }
        }
        assert!((ours - best).abs() <= 2e-3, "separable statres {ours} vs {best}");
    }
}

fn statres_linear_constraint_grid_check() {
    let mut rng = Rng::new(603, 0);
    let d = vec![0.8, 0.8];
    let p = fracsolve_core::problem::make_portfolio(
        vec![2.0, 2.0],
        None,
        vec![0.9, 0.4],
        d.clone(),
    )
    .unwrap();
    for _ in 0..10 {
        let x = prox::project_simplex_box(&rng.uniform_vec(2, 0.0, 1.0), &d).unwrap();
        let ours = metrics::statres(&p, &x).unwrap();
        let kx = p.k_op().apply(&x);
        let f = p.f(&kx);
        let num = p.numerator(&x);
        let kty = p.k_op().adjoint(&p.f_subgradient(&kx));
        let grad = p.grad_h(&x);
        let mut best = f64::INFINITY;
        let mut eta = -6.0;
        while eta <= 6.0 {
            let mut sq = 0.0;
            for i in 0..2 {
                let r = num * kty[i] - f * grad[i] - f * eta;
                let lower = x[i] <= 1e-9;
                let upper = x[i] >= d[i] - 1e-9;
                let dist = match (lower, upper) {
                    (true, true) => 0.0,
                    (true, false) => r.max(0.0),
                    (false, true) => (-r).max(0.0),
                    (false, false) => r.abs(),
                };
                sq += dist * dist;
            }
            best = best.min(sq.sqrt());
            eta += 1e-4;
        }
        assert!((ours - best).abs() <= 1e-3, "portfolio statres {ours} vs {best}");
    }
}

// ---------------------------------------------------------------------------
// 7. Numerical hygiene: gradients and adjoints.
// ---------------------------------------------------------------------------

fn check_gradient(problem: &FractionalProblem, x: &[f64], label: &str) {
    let g = problem.grad_h(x);
    let step = 1e-6;
    let fd: Vec<f64> = (0..x.len())
        .map(|i| {
            let mut fwd = x.to_vec();
            let mut bwd = x.to_vec();
            fwd[i] += step;
            bwd[i] -= step;
            (problem.h(&fwd) - problem.h(&bwd)) / (2.0 * step)
        })
        .collect();
    let rel = linalg::dist(&g, &fd) / linalg::norm(&g).max(1.0);
    assert!(rel <= 1e-5, "{label}: gradient check failed with relative error {rel}");
}

#[test]
fn criterion_07_numerical_hygiene() {
    let mut rng = Rng::new(700, 0);

    // Gradients of all four families at random points.
    let spec = desk_l1sk_spec();
    let dataset = generate_dataset(&spec, 1).unwrap();
    let (problem, _) = build_problem(&dataset, &spec).unwrap();
    for _ in 0..20 {
        let x = rng.uniform_vec(problem.dim(), -1.0, 1.0);
        check_gradient(&problem, &x, "l1sk");
    }

    let spec = desk_ct_spec();
    let dataset = generate_dataset(&spec, 1).unwrap();
    let (problem, _) = build_problem(&dataset, &spec).unwrap();
    for _ in 0..20 {
        let x = rng.uniform_vec(problem.dim(), 0.0, 1.0);
        check_gradient(&problem, &x, "ct");
    }

    let spec = desk_portfolio_spec(50, 5);
    let dataset = generate_dataset(&spec, 1).unwrap();
    let (problem, _) = build_problem(&dataset, &spec).unwrap();
    for _ in 0..20 {
        let x = prox::project_simplex(&rng.uniform_vec(problem.dim(), 0.0, 1.0));
        check_gradient(&problem, &x, "portfolio");
    }

    let spec = desk_sharpe_spec();
    let dataset = generate_dataset(&spec, 1).unwrap();
    let (problem, _) = build_problem(&dataset, &spec).unwrap();
    for _ in 0..20 {
        let x = prox::project_simplex(&rng.uniform_vec(problem.dim(), 0.0, 1.0));
        check_gradient(&problem, &x, "sharpe");
    }

    // Adjoint identity for every shipped operator kind.
    let dense = DenseMatrix::new(7, 5, rng.uniform_vec(35, -1.0, 1.0)).unwrap();
    assert!(adjoint_discrepancy(&dense, 100, 71) <= 1e-10);
    assert!(adjoint_discrepancy(&Identity::new(9), 100, 72) <= 1e-10);
    let row = RowVector::new(rng.uniform_vec(6, -1.0, 1.0)).unwrap();
    assert!(adjoint_discrepancy(&row, 100, 73) <= 1e-10);
    let grad = Grad2d::new(8).unwrap();
    assert!(adjoint_discrepancy(&grad, 100, 74) <= 1e-10);
    let radon = mini_radon(16, 10, 150.0, 23).unwrap();
    assert!(adjoint_discrepancy(&radon, 100, 75) <= 1e-10);
    pass(7, "numerical hygiene");
}

// ---------------------------------------------------------------------------
// 8. CT reconstruction quality relative to the start point.
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_ct_property_acceptance() {
    let start = Instant::now();
    let spec = desk_ct_spec();
    let dataset = generate_dataset(&spec, spec.seed).unwrap();
    let (mut problem, x0) = build_problem(&dataset, &spec).unwrap();

    let (phantom, side) = match &dataset {
        Dataset::Ct { phantom, side, .. } => (phantom.clone(), *side),
        _ => unreachable!(),
    };
    let initial = Image2D::new(side, x0.clone()).unwrap();
    let rmse_initial = metrics::rmse(&initial, &phantom).unwrap();
    let ssim_initial = metrics::ssim(&initial, &phantom).unwrap();

    let result = solve_linesearch(&mut problem, &spec.solver, &x0).unwrap();
    let reconstruction = Image2D::new(side, result.x_final.clone()).unwrap();
    let rmse_final = metrics::rmse(&reconstruction, &phantom).unwrap();
    let ssim_final = metrics::ssim(&reconstruction, &phantom).unwrap();

    assert!(
        rmse_final < 0.2 * rmse_initial,
        "rmse {rmse_final} not below 0.2 x {rmse_initial}"
    );
    assert!(
        ssim_final > ssim_initial,
        "ssim did not improve: {ssim_final} vs {ssim_initial}"
    );
    assert_eq!(metrics::ssim(&phantom, &phantom).unwrap(), 1.0);

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 300.0, "ct run took {elapsed:.1} s");
    pass(8, "ct reconstruction quality");
}

// ---------------------------------------------------------------------------
// 9. Sparse recovery quality across seeds.
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_l1sk_property_acceptance() {
    let start = Instant::now();
    let spec = desk_l1sk_spec();
    let mut good = 0;
    for seed in 1..=20u64 {
        let dataset = generate_dataset(&spec, seed).unwrap();
        let (mut problem, x0) = build_problem(&dataset, &spec).unwrap();
        let x_star = match &dataset {
            Dataset::L1Sk { x_star, .. } => x_star.clone(),
            _ => unreachable!(),
        };
        let err_initial = metrics::rel_err(&x0, &x_star);
        let result = solve_linesearch(&mut problem, &spec.solver, &x0).unwrap();
        let err_final = metrics::rel_err(&result.x_final, &x_star);
        let statres = metrics::statres(&problem, &result.x_final).unwrap();
        if statres <= 1e-3 && err_final < err_initial {
            good += 1;
        }
    }
    assert!(good >= 18, "only {good} of 20 seeds met the quality bar");
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "sparse recovery sweep took {elapsed:.1} s");
    pass(9, "sparse recovery quality");
}

// ---------------------------------------------------------------------------
// 10. Determinism of the benchmark pipelines.
// ---------------------------------------------------------------------------

/// Drop the timing columns, which are the only legitimately varying fields.
fn strip_timing_columns(csv: &str) -> String {
    let mut lines = csv.lines();
    let header = lines.next().unwrap_or_default();
    let cols: Vec<&str> = header.split(',').collect();
    let keep: Vec<usize> = cols
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != "cpu_seconds" && **c != "wall_ms")
        .map(|(i, _)| i)
        .collect();
    let mut out = String::new();
    for line in std::iter::once(header).chain(lines) {
        let fields: Vec<&str> = line.split(',').collect();
        let kept: Vec<&str> = keep.iter().filter_map(|&i| fields.get(i).copied()).collect();
        out.push_str(&kept.join(","));
        out.push('\n');
    }
    out
}

fn bench_csv(spec: &ExperimentSpec) -> String {
    let rows = run_bench(spec, 1).unwrap();
    let mut csv = String::from(fracsolve_cli::commands::ResultRow::CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.to_csv_line());
        csv.push('\n');
    }
    strip_timing_columns(&csv)
}

#[test]
fn criterion_10_determinism() {
    // Portfolio grid (criterion 5 pipeline), two consecutive runs.
    for (m, _, _) in PORTFOLIO_REFERENCE {
        let spec = portfolio_bench_spec(m);
        assert_eq!(bench_csv(&spec), bench_csv(&spec), "portfolio m = {m} drifted");
    }

    // Sparse recovery bench (criterion 9 pipeline).
    let mut spec = desk_l1sk_spec();
    spec.repetitions = 20;
    assert_eq!(bench_csv(&spec), bench_csv(&spec), "l1sk bench drifted");

    // CT solve including its trace (criterion 8 pipeline).
    let spec = desk_ct_spec();
    let (row_a, result_a) = solve_once(&spec, spec.seed).unwrap();
    let (row_b, result_b) = solve_once(&spec, spec.seed).unwrap();
    assert_eq!(
        strip_timing_columns(&format!(
            "{}\n{}\n",
            fracsolve_cli::commands::ResultRow::CSV_HEADER,
            row_a.to_csv_line()
        )),
        strip_timing_columns(&format!(
            "{}\n{}\n",
            fracsolve_cli::commands::ResultRow::CSV_HEADER,
            row_b.to_csv_line()
        )),
        "ct result row drifted"
    );
    assert_eq!(
        strip_timing_columns(&result_a.trace.to_csv()),
        strip_timing_columns(&result_b.trace.to_csv()),
        "ct trace drifted"
    );
    pass(10, "determinism");
}
