use super::{dot, norm2, solve_cg, solve_gmres, SolverReport, SparseMatrix};
use crate::error::{Error, Result};
use crate::Real;

const MAX_ITER: usize = 500;
const STALL_WINDOW: usize = 60;

/// Converged eigenpair of `A v = λ M v` (or of the transposed problem).
#[derive(Debug, Clone)]
pub struct EigenPair<T> {
    pub lambda: T,
    pub vector: Vec<T>,
    pub report: SolverReport,
}

/// Shift-invert inverse iteration for the eigenvalue nearest `shift`.
///
/// With `adjoint` set, iterates with `(A − σM)ᵀ` and returns a left
/// eigenvector. Starts from the all-ones vector with a small deterministic
/// perturbation (so it is not itself an eigenvector of simple test matrices);
/// the returned vector has unit Euclidean norm and its largest-magnitude
/// entry positive.
pub fn eigen_pair<T: Real>(
    a: &SparseMatrix<T>,
    m: &SparseMatrix<T>,
    shift: T,
    adjoint: bool,
    tol: T,
) -> Result<EigenPair<T>> {
    let n = a.nrows();
    let shifted = a.add_scaled(-shift, m)?;
    let (op, a_op, m_op) = if adjoint {
        (shifted.transpose(), a.transpose(), m.transpose())
    } else {
        (shifted, a.clone(), m.clone())
    };
    let inner_tol = (tol * T::lit(1e-3)).max(T::lit(1e-11)).max(T::epsilon() * T::lit(20.0));
    let symmetric = op.is_symmetric(T::epsilon() * T::lit(1e3));
    let inner = |rhs: &[T]| {
        if symmetric {
            // CG first; an indefinite shift may break it down
            let (x, rep) = solve_cg(&op, rhs, inner_tol, 10 * n + 1000);
            if rep.converged && x.iter().all(|v| v.is_finite()) {
                return (x, rep);
            }
        }
        solve_gmres(&op, rhs, inner_tol, 150.min(n), 40 * n + 2000)
    };
    let mut v = start_vector::<T>(n);
    let mut history = Vec::new();
    for it in 1..=MAX_ITER {
        let rhs = m_op.mul_vec(&v);
        let (x, rep) = inner(&rhs);
        let x_norm = norm2(&x);
        if !rep.converged || !x_norm.is_finite() || x_norm == T::zero() {
            return Err(Error::ShiftRejected(shift.to_f64_lossy()));
        }
        v = x.into_iter().map(|xi| xi / x_norm).collect();
        let av = a_op.mul_vec(&v);
        let mv = m_op.mul_vec(&v);
        let vmv = dot(&v, &mv);
        if vmv == T::zero() {
            return Err(Error::UnsupportedSpectrum("iterate in the kernel of M".into()));
        }
        let lambda = dot(&v, &av) / vmv;
        let res: Vec<T> = av.iter().zip(&mv).map(|(&p, &q)| p - lambda * q).collect();
        let res_norm = norm2(&res);
        history.push(res_norm.to_f64_lossy());
        if res_norm <= tol {
            fix_sign(&mut v);
            let report = SolverReport {
                iterations: it,
                final_residual_norm: res_norm.to_f64_lossy(),
                converged: true,
                history,
            };
            return Ok(EigenPair { lambda, vector: v, report });
        }
        if it > 2 * STALL_WINDOW {
            let recent = history[it - STALL_WINDOW..].iter().cloned().fold(f64::INFINITY, f64::min);
            let before = history[it - 2 * STALL_WINDOW..it - STALL_WINDOW]
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if recent > 0.5 * before {
                return Err(Error::UnsupportedSpectrum(format!(
                    "inverse iteration stalled at residual {recent:.3e}; no single real eigenvalue dominates near shift {}",
                    shift.to_f64_lossy()
                )));
            }
        }
    }
    Err(Error::UnsupportedSpectrum(format!("no convergence within {MAX_ITER} iterations")))
}

/// Ones perturbed by a low-discrepancy sequence, normalized.
///
/// Plain ones can coincide with an eigenvector (e.g. `[[2,1],[0,3]]`), which
/// would pin the iteration to the wrong eigenvalue.
fn start_vector<T: Real>(n: usize) -> Vec<T> {
    let golden = 0.618_033_988_749_894_9_f64;
    let raw: Vec<T> = (0..n).map(|i| T::lit(1.0 + 0.5 * ((i as f64 + 1.0) * golden).fract())).collect();
    let nrm = norm2(&raw);
    raw.into_iter().map(|x| x / nrm).collect()
}

fn fix_sign<T: Real>(v: &mut [T]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (T::one() + T::lit(1e-12)) {
            best = i;
        }
    }
    if v[best] < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_smallest() {
        let a = SparseMatrix::<f64>::diagonal_matrix(&[1.0, 2.0]);
        let m = SparseMatrix::<f64>::identity(2);
        let p = eigen_pair(&a, &m, 0.0, false, 1e-12).unwrap();
        assert!((p.lambda - 1.0).abs() < 1e-12);
        assert!((p.vector[0] - 1.0).abs() < 1e-10 && p.vector[1].abs() < 1e-10);
    }

    #[test]
    fn nonsymmetric_primal_and_adjoint() {
        let a = SparseMatrix::<f64>::from_dense(&[vec![2.0, 1.0], vec![0.0, 3.0]]);
        let m = SparseMatrix::<f64>::identity(2);
        let p = eigen_pair(&a, &m, 1.9, false, 1e-12).unwrap();
        assert!((p.lambda - 2.0).abs() < 1e-10, "{p:?}");
        assert!((p.vector[0] - 1.0).abs() < 1e-10 && p.vector[1].abs() < 1e-10);
        let q = eigen_pair(&a, &m, 1.9, true, 1e-12).unwrap();
        assert!((q.lambda - 2.0).abs() < 1e-10);
        let s = 0.5f64.sqrt();
        // ties in magnitude keep the first entry as the positive one
        assert!((q.vector[0] - s).abs() < 1e-9 && (q.vector[1] + s).abs() < 1e-9);
    }

    #[test]
    fn exact_shift_is_rejected() {
        let a = SparseMatrix::<f64>::diagonal_matrix(&[1.0, 2.0]);
        let m = SparseMatrix::<f64>::identity(2);
        assert!(matches!(eigen_pair(&a, &m, 1.0, false, 1e-10), Err(Error::ShiftRejected(_))));
    }

    #[test]
    fn complex_pair_is_unsupported() {
        let a = SparseMatrix::<f64>::from_dense(&[vec![0.0, -1.0], vec![1.0, 0.0]]);
        let m = SparseMatrix::<f64>::identity(2);
        assert!(matches!(eigen_pair(&a, &m, 0.0, false, 1e-10), Err(Error::UnsupportedSpectrum(_))));
    }
}
