//! Seeded, deterministic generators for the benchmark families.
//!
//! Every array draws from its own PRNG stream (see [`crate::rng`]), so a given
//! `(parameters, seed)` pair always produces the same bytes regardless of
//! generation order.

use crate::operators::{DenseMatrix, Image2D};
use crate::rng::Rng;
use crate::{Error, Result};

// One stream per generated array.
const STREAM_ODCT_W: u64 = 1;
const STREAM_SUPPORT: u64 = 2;
const STREAM_SIGNS: u64 = 3;
const STREAM_PORTFOLIO_L: u64 = 4;
const STREAM_PORTFOLIO_MU: u64 = 5;
const STREAM_NOISE: u64 = 6;
const STREAM_START: u64 = 7;
const STREAM_SHARPE_K: u64 = 8;
const STREAM_SHARPE_A: u64 = 9;

/// Oversampled DCT sensing matrix: column `j` (1-based) is
/// `cos(2 pi w (j) / coherence) / sqrt(m)` elementwise, with `w` uniform on
/// `[0, 1)^m`. Larger `coherence` makes neighboring columns more correlated.
pub fn gen_odct(m: usize, n: usize, coherence: f64, seed: u64) -> Result<DenseMatrix> {
    if m == 0 || n == 0 || coherence <= 0.0 {
        return Err(Error::InvalidArgument(
            "odct needs m, n >= 1 and a positive coherence".into(),
        ));
    }
    let mut rng = Rng::new(seed, STREAM_ODCT_W);
    let w = rng.uniform_vec(m, 0.0, 1.0);
    Ok(odct_from_w(m, n, coherence, &w))
}

/// Deterministic core of [`gen_odct`], exposed so tests can pin `w`.
pub fn odct_from_w(m: usize, n: usize, coherence: f64, w: &[f64]) -> DenseMatrix {
    let scale = 1.0 / (m as f64).sqrt();
    let mut entries = vec![0.0; m * n];
    for (i, &wi) in w.iter().enumerate().take(m) {
        for j in 0..n {
            let arg = 2.0 * std::f64::consts::PI * wi * (j + 1) as f64 / coherence;
            entries[i * n + j] = arg.cos() * scale;
        }
    }
    DenseMatrix::new(m, n, entries).expect("entry count matches by construction")
}

/// A `kappa`-sparse ground truth: the support is drawn by rejection sampling
/// with pairwise index distance at least `2 * coherence`, and the nonzero
/// values are `sign(gaussian) / 2`.
pub fn gen_sparse_signal(
    n: usize,
    kappa: usize,
    coherence: f64,
    seed: u64,
) -> Result<(Vec<f64>, Vec<usize>)> {
    if kappa == 0 || kappa > n {
        return Err(Error::InvalidArgument(format!(
            "kappa must lie in [1, {n}], got {kappa}"
        )));
    }
    let min_dist = 2.0 * coherence;
    if kappa as f64 * min_dist > n as f64 {
        return Err(Error::Infeasible(format!(
            "cannot place {kappa} spikes with distance {min_dist} in {n} slots"
        )));
    }
    let mut rng = Rng::new(seed, STREAM_SUPPORT);
    let mut support: Option<Vec<usize>> = None;
    for _attempt in 0..10_000 {
        let mut idx: Vec<usize> = (0..kappa).map(|_| rng.below(n)).collect();
        idx.sort_unstable();
        let ok = idx
            .windows(2)
            .all(|w| (w[1] - w[0]) as f64 >= min_dist && w[1] != w[0]);
        if ok {
            support = Some(idx);
            break;
        }
    }
    let support = support.ok_or_else(|| {
        Error::Infeasible("support sampling exhausted its attempt budget".into())
    })?;

    let mut sign_rng = Rng::new(seed, STREAM_SIGNS);
    let mut x = vec![0.0; n];
    for &i in &support {
        let y = sign_rng.gaussian();
        x[i] = if y >= 0.0 { 0.5 } else { -0.5 };
    }
    Ok((x, support))
}

/// Portfolio data: `Sigma = 2 I`, factor loadings uniform on `[-1, 1]`
/// (row-major fill), expected returns uniform on `(0, 1)`, and caps `1.75/n`.
pub struct PortfolioData {
    pub sigma_diag: Vec<f64>,
    pub factors: DenseMatrix,
    pub mu: Vec<f64>,
    pub caps: Vec<f64>,
}

pub fn gen_portfolio(n: usize, m: usize, seed: u64) -> Result<PortfolioData> {
    if m >= n {
        return Err(Error::InvalidArgument(format!(
            "factor count must satisfy m < n, got m = {m}, n = {n}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("factor count must be positive".into()));
    }
    let mut l_rng = Rng::new(seed, STREAM_PORTFOLIO_L);
    let factors = DenseMatrix::new(n, m, l_rng.uniform_vec(n * m, -1.0, 1.0))?;
    let mut mu_rng = Rng::new(seed, STREAM_PORTFOLIO_MU);
    let mu: Vec<f64> = (0..n)
        .map(|_| loop {
            let v = mu_rng.uniform();
            if v > 0.0 {
                break v;
            }
        })
        .collect();
    Ok(PortfolioData {
        sigma_diag: vec![2.0; n],
        factors,
        mu,
        caps: vec![1.75 / n as f64; n],
    })
}

/// Ellipse table of the head phantom (modified intensity variant, so raw
/// pixel sums already lie in `[0, 1]`): value, semi-axes, center, rotation in
/// degrees.
const PHANTOM_ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

/// Rasterize the ten-ellipse head phantom on a `side x side` grid over
/// `[-1, 1]^2`; pixel values are the summed intensities of the containing
/// ellipses, clipped to `[0, 1]`.
pub fn gen_shepp_logan(side: usize) -> Result<Image2D> {
    if side < 16 {
        return Err(Error::InvalidArgument(format!(
            "phantom needs side >= 16, got {side}"
        )));
    }
    let mut pixels = vec![0.0; side * side];
    for r in 0..side {
        for c in 0..side {
            let x = -1.0 + (c as f64 + 0.5) * 2.0 / side as f64;
            let y = 1.0 - (r as f64 + 0.5) * 2.0 / side as f64;
            let mut v = 0.0;
            for &(value, a, b, x0, y0, phi_deg) in &PHANTOM_ELLIPSES {
                let phi = phi_deg.to_radians();
                let (s, co) = phi.sin_cos();
                let dx = x - x0;
                let dy = y - y0;
                let xr = co * dx + s * dy;
                let yr = -s * dx + co * dy;
                if (xr / a).powi(2) + (yr / b).powi(2) <= 1.0 {
                    v += value;
                }
            }
            pixels[r * side + c] = v.clamp(0.0, 1.0);
        }
    }
    Image2D::new(side, pixels)
}

/// Additive Gaussian noise scaled to a relative level:
/// `b + level * ||b|| * g / ||g||`. A level of zero returns `b` unchanged.
pub fn add_noise(b: &[f64], level: f64, seed: u64) -> Vec<f64> {
    if level == 0.0 {
        return b.to_vec();
    }
    let mut rng = Rng::new(seed, STREAM_NOISE);
    let g = rng.gaussian_vec(b.len());
    let scale = level * crate::linalg::norm(b) / crate::linalg::norm(&g).max(f64::EPSILON);
    b.iter().zip(&g).map(|(&bi, &gi)| bi + scale * gi).collect()
}

/// Start point for the sparse-recovery runs: the ground truth perturbed by
/// `0.2 z` with `z` uniform on `[-1, 1]^n`, clipped into the box so the start
/// is feasible.
pub fn gen_l1sk_start(x_star: &[f64], lo: &[f64], hi: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed, STREAM_START);
    let z = rng.uniform_vec(x_star.len(), -1.0, 1.0);
    let raw: Vec<f64> = x_star.iter().zip(&z).map(|(&x, &zi)| x + 0.2 * zi).collect();
    crate::linalg::clamp_slice(&raw, lo, hi)
}

/// Desk-scale Sharpe data: a well-conditioned Cholesky-like factor near the
/// identity, coefficients uniform on `(0, 0.5)`, and a cap `r = 1` that keeps
/// the numerator positive on the simplex.
pub fn gen_sharpe(n: usize, seed: u64) -> Result<(Vec<f64>, f64, DenseMatrix)> {
    if n == 0 {
        return Err(Error::InvalidArgument("sharpe dimension must be positive".into()));
    }
    let mut k_rng = Rng::new(seed, STREAM_SHARPE_K);
    let mut entries = k_rng.uniform_vec(n * n, -0.3, 0.3);
    for i in 0..n {
        entries[i * n + i] += 1.0;
    }
    let k = DenseMatrix::new(n, n, entries)?;
    let mut a_rng = Rng::new(seed, STREAM_SHARPE_A);
    let a = a_rng.uniform_vec(n, 0.0, 0.5);
    Ok((a, 1.0, k))
}
