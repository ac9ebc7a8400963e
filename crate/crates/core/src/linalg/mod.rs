//! Sparse storage and the iterative kernels used by every solve in the crate.

mod eigen_pair;
mod krylov;
mod newton;
mod sparse;

use std::cell::Cell;
use std::fmt;

pub use eigen_pair::{eigen_pair, EigenPair};
pub use krylov::{solve_cg, solve_gmres, solve_gmres_with};
pub use newton::newton_solve;
pub use sparse::SparseMatrix;

use crate::Real;

/// Outcome of an iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub converged: bool,
    /// Residual norm after every iteration, starting with the initial one.
    pub history: Vec<f64>,
}

impl fmt::Display for SolverReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} after {} iterations, residual {:.3e}",
            if self.converged { "converged" } else { "not converged" },
            self.iterations,
            self.final_residual_norm
        )
    }
}

thread_local! {
    static LINEAR_SOLVES: Cell<usize> = const { Cell::new(0) };
}

/// Number of linear solves (CG or GMRES calls) issued on the current thread.
///
/// Used to assert that an estimator works purely from already computed data.
pub fn linear_solve_count() -> usize {
    LINEAR_SOLVES.with(|c| c.get())
}

fn count_linear_solve() {
    LINEAR_SOLVES.with(|c| c.set(c.get() + 1));
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
