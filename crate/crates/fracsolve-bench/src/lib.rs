//! Shared fixtures for the criterion benchmarks.

use fracsolve_core::datagen;
use fracsolve_core::operators::{mini_radon, SparseMatrix};
use fracsolve_core::problem::{make_portfolio, FractionalProblem};

/// Desk-scale projection matrix used by the operator benchmarks.
pub fn radon_fixture(side: usize) -> SparseMatrix {
    mini_radon(side, 30, 150.0, (side as f64 * std::f64::consts::SQRT_2).ceil() as usize)
        .expect("valid geometry")
}

/// Portfolio instance used by the solver benchmarks.
pub fn portfolio_fixture(n: usize, m: usize) -> FractionalProblem {
    let data = datagen::gen_portfolio(n, m, 1).expect("valid dimensions");
    make_portfolio(data.sigma_diag, Some(data.factors), data.mu, data.caps)
        .expect("well-posed instance")
}
