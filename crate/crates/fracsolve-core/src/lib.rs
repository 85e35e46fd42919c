//! Solver toolkit for structured fractional programs
//!
//! ```text
//!     minimize over x in S     ( g(x) + h(x) ) / f(Kx)
//! ```
//!
//! where `g` is convex (possibly nonsmooth), `h` is differentiable with a
//! Lipschitz gradient (possibly nonconvex), `f` is convex, `K` is a linear
//! operator, and `S` is a compact convex constraint set.
//!
//! The crate provides:
//!
//! * a single-loop proximal subgradient iteration with a relaxation step
//!   ([`solver::solve_fixed`]) and a nonmonotone line-search variant with a
//!   Barzilai-Borwein style step seed ([`solver::solve_linesearch`]),
//! * four ready-made problem families: sparse signal recovery with an
//!   L1-over-top-k objective, total-variation CT reconstruction, single-period
//!   portfolio selection, and Sharpe-ratio minimization ([`problem`]),
//! * the proximal / projection subroutines those families need ([`prox`],
//!   [`admm`]),
//! * evaluation metrics including a lifted stationarity residual ([`metrics`]),
//! * deterministic, seeded data generators ([`datagen`]).

pub mod admm;
pub mod datagen;
pub mod linalg;
pub mod metrics;
pub mod operators;
pub mod problem;
pub mod prox;
pub mod rng;
pub mod solver;

pub use operators::{DenseMatrix, Grad2d, Identity, Image2D, LinearOperator, RowVector, SparseMatrix};
pub use problem::{FractionalProblem, MeritValue};
pub use solver::{IterationTrace, SolveResult, SolverConfig, SolverMode};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible constraint data: {0}")]
    Infeasible(String),

    /// A model assumption was violated at runtime (nonpositive denominator,
    /// negative numerator, or an infeasible iterate).
    #[error("model violation{}: {message}", iteration.map(|k| format!(" at iteration {k}")).unwrap_or_default())]
    ModelViolation {
        message: String,
        iteration: Option<usize>,
    },

    #[error("stationarity residual unavailable for this problem family")]
    StatresUnavailable,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn model(message: impl Into<String>) -> Self {
        Error::ModelViolation {
            message: message.into(),
            iteration: None,
        }
    }

    /// Attach an iteration index to a model violation.
    pub fn at_iteration(self, k: usize) -> Self {
        match self {
            Error::ModelViolation { message, .. } => Error::ModelViolation {
                message,
                iteration: Some(k),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
