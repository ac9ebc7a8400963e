//! Discrete primal and dual solves for registered problems.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::assembly::{
    apply_dirichlet, apply_fixed_values, assemble_adjoint_operator, assemble_form_residual, assemble_functional,
    assemble_load, assemble_operator,
};
use crate::fem::{FeFunction, FeSpace};
use crate::linalg::{solve_cg, solve_gmres, SparseMatrix};
use crate::problems::{GoalFunctional, ProblemDefinition};
use crate::Real;

pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 25;
const GMRES_RESTART: usize = 120;

pub fn linear_tol<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(100.0))
}

/// CG for symmetric systems, GMRES otherwise; non-convergence is an error.
pub fn solve_linear<T: Real>(a: &SparseMatrix<T>, b: &[T], symmetric: bool, context: &str) -> Result<Vec<T>> {
    let n = b.len();
    let (x, report) = if symmetric {
        solve_cg(a, b, linear_tol(), 10 * n + 1000)
    } else {
        solve_gmres(a, b, linear_tol(), GMRES_RESTART.min(n.max(1)), 50 * n + 2000)
    };
    if !report.converged {
        return Err(Error::NotConverged { context: context.into(), report });
    }
    Ok(x)
}

fn dirichlet_values<T: Real>(problem: &ProblemDefinition<T>, space: &FeSpace<T>) -> BTreeMap<usize, T> {
    space
        .dofs_with_tags(&problem.dirichlet_tags)
        .into_iter()
        .map(|d| (d, (problem.dirichlet_value)(space.support_point(d))))
        .collect()
}

/// Primal solution `u_h`; Newton's method for nonlinear forms.
pub fn solve_primal<T: Real>(problem: &ProblemDefinition<T>, space: &Arc<FeSpace<T>>) -> Result<FeFunction<T>> {
    let source = problem.source.clone();
    let load = assemble_load(space, |x| source(x));
    if !problem.form.is_nonlinear() {
        let a = assemble_operator(space, &problem.form, None)?;
        let (a, b) = apply_dirichlet(&a, &load, space, &problem.dirichlet_tags, |x| (problem.dirichlet_value)(x));
        let x = solve_linear(&a, &b, problem.form.is_symmetric(), "primal solve")?;
        return Ok(FeFunction::from_coefficients(space.clone(), x));
    }
    let fixed = dirichlet_values(problem, space);
    let mut x0 = vec![T::zero(); space.dof_count()];
    for (&d, &g) in &fixed {
        x0[d] = g;
    }
    let residual = |x: &[T]| {
        let u = FeFunction::from_coefficients(space.clone(), x.to_vec());
        let mut r = assemble_form_residual(space, &problem.form, &u);
        for (ri, li) in r.iter_mut().zip(&load) {
            *ri -= *li;
        }
        for (&d, &g) in &fixed {
            r[d] = x[d] - g;
        }
        r
    };
    let zero_fixed: BTreeMap<usize, T> = fixed.keys().map(|&d| (d, T::zero())).collect();
    let mut assembly_error = None;
    let jacobian = |x: &[T]| {
        let u = FeFunction::from_coefficients(space.clone(), x.to_vec());
        match assemble_operator(space, &problem.form, Some(&u)) {
            Ok(j) => apply_fixed_values(&j, &vec![T::zero(); x.len()], &zero_fixed).0,
            Err(e) => {
                assembly_error = Some(e);
                SparseMatrix::identity(x.len())
            }
        }
    };
    let (x, report) = crate::linalg::newton_solve(residual, jacobian, &x0, T::lit(NEWTON_TOL), NEWTON_MAX_ITER);
    if let Some(e) = assembly_error {
        return Err(e);
    }
    if !report.converged {
        return Err(Error::NotConverged { context: "Newton iteration".into(), report });
    }
    Ok(FeFunction::from_coefficients(space.clone(), x))
}

/// Discrete dual `a′(u_h)(φ, z_h) = J′(φ)` for all test functions `φ`,
/// with homogeneous Dirichlet values.
pub fn solve_dual<T: Real>(
    problem: &ProblemDefinition<T>,
    goal: &GoalFunctional<T>,
    u_h: &FeFunction<T>,
    space: &Arc<FeSpace<T>>,
) -> Result<FeFunction<T>> {
    let lin = problem.form.is_nonlinear().then_some(u_h);
    let a = assemble_adjoint_operator(space, &problem.form, lin)?;
    let rhs = assemble_functional(space, goal, Some(u_h))?;
    let (a, b) = apply_dirichlet(&a, &rhs, space, &problem.dirichlet_tags, |_| T::zero());
    let z = solve_linear(&a, &b, problem.form.is_symmetric(), "dual solve")?;
    Ok(FeFunction::from_coefficients(space.clone(), z))
}
