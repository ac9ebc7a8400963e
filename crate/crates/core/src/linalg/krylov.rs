use super::{axpy, count_linear_solve, dot, norm2, SolverReport, SparseMatrix};
use crate::Real;

fn jacobi_inverse<T: Real>(a: &SparseMatrix<T>) -> Vec<T> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != T::zero() { T::one() / d } else { T::one() })
        .collect()
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
///
/// Stops once `‖b − A x‖₂ ≤ tol·‖b‖₂`. Running out of iterations yields a
/// non-converged report rather than an error.
pub fn solve_cg<T: Real>(a: &SparseMatrix<T>, b: &[T], tol: T, max_iter: usize) -> (Vec<T>, SolverReport) {
    count_linear_solve();
    debug_assert!(a.is_symmetric(T::lit(1e-10)), "CG requires a symmetric matrix");
    let n = b.len();
    let inv_diag = jacobi_inverse(a);
    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let b_norm = norm2(b);
    let target = tol * b_norm;
    let mut res = b_norm;
    let mut history = vec![res.to_f64_lossy()];
    if res <= target {
        return (x, report(0, res, true, history));
    }
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= T::zero() || !pap.is_finite() {
            return (x, report(it, res, false, history));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        res = norm2(&r);
        history.push(res.to_f64_lossy());
        if res <= target {
            return (x, report(it, res, true, history));
        }
        for ((zi, &ri), &d) in z.iter_mut().zip(&r).zip(&inv_diag) {
            *zi = ri * d;
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    (x, report(max_iter, res, false, history))
}

fn report<T: Real>(iterations: usize, res: T, converged: bool, history: Vec<f64>) -> SolverReport {
    SolverReport { iterations, final_residual_norm: res.to_f64_lossy(), converged, history }
}

/// Restarted GMRES with right Jacobi preconditioning from a zero initial guess.
///
/// Right preconditioning keeps the monitored residual equal to the true
/// residual of the unpreconditioned system, so the convergence test is
/// `‖b − A x‖₂ ≤ tol·‖b‖₂`. Breakdown without convergence and stagnation over
/// a whole restart cycle both end in a non-converged report.
pub fn solve_gmres<T: Real>(
    a: &SparseMatrix<T>,
    b: &[T],
    tol: T,
    restart: usize,
    max_iter: usize,
) -> (Vec<T>, SolverReport) {
    solve_gmres_with(|x, y| a.mul_vec_into(x, y), &jacobi_inverse(a), b, tol, restart, max_iter)
}

/// GMRES for an operator given as `apply(x, y)` writing `y = A x`, with the
/// diagonal right preconditioner `inv_diag`.
pub fn solve_gmres_with<T: Real>(
    mut apply: impl FnMut(&[T], &mut [T]),
    inv_diag: &[T],
    b: &[T],
    tol: T,
    restart: usize,
    max_iter: usize,
) -> (Vec<T>, SolverReport) {
    count_linear_solve();
    let n = b.len();
    let restart = restart.max(1).min(n.max(1));
    let mut x = vec![T::zero(); n];
    let b_norm = norm2(b);
    let target = tol * b_norm;
    let mut res = b_norm;
    let mut history = vec![res.to_f64_lossy()];
    if res <= target {
        return (x, report(0, res, true, history));
    }
    let mut total = 0usize;
    let mut r = b.to_vec();
    let mut w = vec![T::zero(); n];
    let mut tmp = vec![T::zero(); n];
    while total < max_iter {
        let cycle_start_res = res;
        let beta = res;
        let mut basis: Vec<Vec<T>> = vec![r.iter().map(|&v| v / beta).collect()];
        // Hessenberg columns, already rotated
        let mut h: Vec<Vec<T>> = Vec::with_capacity(restart);
        let mut cs: Vec<T> = Vec::with_capacity(restart);
        let mut sn: Vec<T> = Vec::with_capacity(restart);
        let mut g = vec![T::zero(); restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        let mut breakdown = false;
        for k in 0..restart {
            if total >= max_iter {
                break;
            }
            total += 1;
            for ((t, &v), &d) in tmp.iter_mut().zip(&basis[k]).zip(inv_diag) {
                *t = v * d;
            }
            apply(&tmp, &mut w);
            let mut col = vec![T::zero(); k + 2];
            // modified Gram-Schmidt, twice for robustness on ill-conditioned bases
            for _ in 0..2 {
                for (j, vj) in basis.iter().enumerate() {
                    let hij = dot(&w, vj);
                    col[j] += hij;
                    axpy(-hij, vj, &mut w);
                }
            }
            let wn = norm2(&w);
            col[k + 1] = wn;
            for j in 0..k {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let denom = (col[k] * col[k] + col[k + 1] * col[k + 1]).sqrt();
            let (c, s) = if denom == T::zero() { (T::one(), T::zero()) } else { (col[k] / denom, col[k + 1] / denom) };
            col[k] = c * col[k] + s * col[k + 1];
            col[k + 1] = T::zero();
            cs.push(c);
            sn.push(s);
            g[k + 1] = -s * g[k];
            g[k] = c * g[k];
            h.push(col);
            k_used = k + 1;
            res = g[k + 1].abs();
            history.push(res.to_f64_lossy());
            if res <= target {
                break;
            }
            if wn <= T::epsilon() * beta {
                breakdown = true;
                break;
            }
            basis.push(w.iter().map(|&v| v / wn).collect());
        }
        // back substitution on the rotated upper triangle
        let mut y = vec![T::zero(); k_used];
        let mut singular = false;
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= h[j][i] * y[j];
            }
            let diag = h[i][i];
            if diag.abs() <= T::epsilon() * beta {
                singular = true;
                y[i] = T::zero();
            } else {
                y[i] = acc / diag;
            }
        }
        let mut update = vec![T::zero(); n];
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &basis[j], &mut update);
        }
        for ((xi, &u), &d) in x.iter_mut().zip(&update).zip(inv_diag) {
            *xi += u * d;
        }
        apply(&x, &mut r);
        for (ri, &bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        res = norm2(&r);
        if let Some(last) = history.last_mut() {
            *last = res.to_f64_lossy();
        }
        if res <= target {
            return (x, report(total, res, true, history));
        }
        let stagnated = res >= cycle_start_res * (T::one() - T::lit(1e-10));
        if singular || breakdown || stagnated {
            return (x, report(total, res, false, history));
        }
    }
    (x, report(total, res, false, history))
}
