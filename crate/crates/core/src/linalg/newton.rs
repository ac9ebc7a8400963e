use super::{norm2, solve_gmres, SolverReport, SparseMatrix};
use crate::Real;

/// Damped Newton iteration for `residual(x) = 0`.
///
/// Each step solves `J(x) δ = −residual(x)` with GMRES and accepts the largest
/// step `2⁻ᵏ δ` (`k ≤ 10`) that decreases the residual norm. Stops once
/// `‖residual(x)‖₂ ≤ tol`.
pub fn newton_solve<T, R, J>(
    mut residual: R,
    mut jacobian: J,
    x0: &[T],
    tol: T,
    max_iter: usize,
) -> (Vec<T>, SolverReport)
where
    T: Real,
    R: FnMut(&[T]) -> Vec<T>,
    J: FnMut(&[T]) -> SparseMatrix<T>,
{
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    let mut res = norm2(&r);
    let mut history = vec![res.to_f64_lossy()];
    let done = |it, res: T, ok, history| SolverReport {
        iterations: it,
        final_residual_norm: res.to_f64_lossy(),
        converged: ok,
        history,
    };
    if res <= tol {
        return (x, done(0, res, true, history));
    }
    for it in 1..=max_iter {
        let jac = jacobian(&x);
        let rhs: Vec<T> = r.iter().map(|&v| -v).collect();
        let inner_tol = (tol / res * T::lit(1e-2)).max(T::epsilon() * T::lit(10.0)).min(T::lit(1e-6));
        let (step, inner) = solve_gmres(&jac, &rhs, inner_tol, 200, 20 * rhs.len() + 1000);
        if !inner.converged && inner.final_residual_norm > 1e-3 * res.to_f64_lossy() {
            return (x, done(it, res, false, history));
        }
        let mut damping = T::one();
        let mut accepted = false;
        for _ in 0..=10 {
            let trial: Vec<T> = x.iter().zip(&step).map(|(&xi, &si)| xi + damping * si).collect();
            let r_trial = residual(&trial);
            let res_trial = norm2(&r_trial);
            if res_trial < res {
                x = trial;
                r = r_trial;
                res = res_trial;
                accepted = true;
                break;
            }
            damping *= T::half();
        }
        history.push(res.to_f64_lossy());
        if !accepted {
            return (x, done(it, res, false, history));
        }
        if res <= tol {
            return (x, done(it, res, true, history));
        }
    }
    (x, done(max_iter, res, false, history))
}
