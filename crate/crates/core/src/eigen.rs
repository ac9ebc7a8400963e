//! Generalized eigenvalue problems `a(u, ψ) = λ m(u, ψ)` with primal and
//! adjoint eigenpairs, and the weighted-residual eigenvalue estimator.

use std::sync::Arc;

use crate::dwr::residual::{self, ResidualData};
use crate::dwr::ErrorEstimate;
use crate::error::{Error, Result};
use crate::fem::assembly::{apply_fixed_values, assemble_operator_with, zero_rows_and_cols, AssemblyOptions};
use crate::fem::recovery::recovery_weight;
use crate::fem::{FeFunction, FeSpace, FormDescriptor};
use crate::linalg::{dot, eigen_pair, SolverReport, SparseMatrix};
use crate::mesh::BoundaryTag;
use crate::problems::{ProblemDefinition, ProblemKind};
use crate::Real;

/// The two forms and boundary conditions of an eigenvalue problem.
#[derive(Debug, Clone)]
pub struct EigenProblem<T> {
    pub a: FormDescriptor<T>,
    pub m: FormDescriptor<T>,
    pub dirichlet_tags: Vec<BoundaryTag>,
    pub shift: T,
}

impl<T: Real> EigenProblem<T> {
    pub fn from_definition(problem: &ProblemDefinition<T>) -> Result<Self> {
        match &problem.kind {
            ProblemKind::Eigen { mass, shift } => Ok(Self {
                a: problem.form.clone(),
                m: mass.clone(),
                dirichlet_tags: problem.dirichlet_tags.clone(),
                shift: *shift,
            }),
            _ => Err(Error::Usage(format!("{} is not an eigenvalue problem", problem.name))),
        }
    }

    /// `a − s·m`, whose strong form gives the eigen residual at `λ = s`.
    fn shifted_form(&self, s: T) -> FormDescriptor<T> {
        let mut terms = self.a.terms.clone();
        terms.extend(self.m.scaled(-s).terms);
        FormDescriptor::new(terms)
    }

    /// Stiffness with identity rows on Dirichlet dofs, and mass with those
    /// rows and columns removed, so boundary dofs carry no eigenvalue.
    pub fn matrices(&self, space: &FeSpace<T>) -> Result<(SparseMatrix<T>, SparseMatrix<T>)> {
        let dirichlet = space.dofs_with_tags(&self.dirichlet_tags);
        let a = assemble_operator_with(space, &self.a, None, AssemblyOptions::default())?;
        let fixed = dirichlet.iter().map(|&d| (d, T::zero())).collect();
        let (a, _) = apply_fixed_values(&a, &vec![T::zero(); a.nrows()], &fixed);
        let m = assemble_operator_with(
            space,
            &self.m,
            None,
            AssemblyOptions { constrained_diagonal: T::zero(), ..Default::default() },
        )?;
        Ok((a, zero_rows_and_cols(&m, &dirichlet)))
    }
}

#[derive(Debug, Clone)]
pub struct EigenSolution<T> {
    pub lambda_h: T,
    /// Normalized to `m(u_h, u_h) = 1`, largest coefficient positive.
    pub u_h: FeFunction<T>,
    pub pi_h: T,
    /// Normalized to `m(u_h, z_h) = 1`.
    pub z_h: FeFunction<T>,
    pub primal_report: SolverReport,
    pub adjoint_report: SolverReport,
}

/// Residual tolerance relative to the size of `M`, whose entries scale
/// with the cell area.
fn eigen_tol<T: Real>(shift: T, m: &SparseMatrix<T>) -> T {
    let scale = m.diagonal().into_iter().fold(T::zero(), |acc, d| acc.max(d.abs()));
    (T::lit(1e-11) * shift.abs().max(T::one()) * scale).max(T::epsilon() * T::lit(1e3) * scale)
}

/// Primal and adjoint eigenpairs nearest `shift` on the Q1 space.
pub fn solve_eigen_pair<T: Real>(problem: &EigenProblem<T>, space: &Arc<FeSpace<T>>) -> Result<EigenSolution<T>> {
    let (a, m) = problem.matrices(space)?;
    let tol = eigen_tol(problem.shift, &m);
    let primal = eigen_pair(&a, &m, problem.shift, false, tol)?;
    let adjoint = eigen_pair(&a, &m, problem.shift, true, tol)?;
    let u = FeFunction::from_coefficients(space.clone(), primal.vector);
    let z = FeFunction::from_coefficients(space.clone(), adjoint.vector);
    let mu = m.mul_vec(u.coefficients());
    let uu = dot(u.coefficients(), &mu);
    if !(uu > T::zero()) {
        return Err(Error::Normalization("m(u_h, u_h) is not positive".into()));
    }
    let u = u.scaled(T::one() / uu.sqrt());
    let mu: Vec<T> = mu.iter().map(|&v| v / uu.sqrt()).collect();
    let uz = dot(z.coefficients(), &mu);
    let z_norm = dot(z.coefficients(), &m.mul_vec(z.coefficients())).sqrt();
    if !(uz.abs() > T::lit(1e-8) * z_norm) {
        return Err(Error::Normalization(format!("m(u_h, z_h) = {uz:e} is too small to normalize")));
    }
    Ok(EigenSolution {
        lambda_h: primal.lambda,
        u_h: u,
        pi_h: adjoint.lambda,
        z_h: z.scaled(T::one() / uz),
        primal_report: primal.report,
        adjoint_report: adjoint.report,
    })
}

/// `m(v, w)` assembled on the space of `v`.
pub fn mass_product<T: Real>(problem: &EigenProblem<T>, v: &FeFunction<T>, w: &FeFunction<T>) -> Result<T> {
    if !Arc::ptr_eq(v.space(), w.space()) {
        return Err(Error::Usage("mass product of functions on different spaces".into()));
    }
    let (_, m) = problem.matrices(v.space())?;
    Ok(dot(v.coefficients(), &m.mul_vec(w.coefficients())))
}

/// `ρ(u_h, λ_h)(w) = a(u_h, w) − λ_h m(u_h, w)` per cell, from the strong form.
fn localized_primal<T: Real>(problem: &EigenProblem<T>, sol: &EigenSolution<T>, w: &FeFunction<T>) -> Result<Vec<T>> {
    let form = problem.shifted_form(sol.lambda_h);
    let data = ResidualData::new(&form, &problem.dirichlet_tags);
    Ok(residual::localize_primal(&data, &sol.u_h, w)?.into_iter().map(|v| -v).collect())
}

/// `ρ*(z_h, π_h)(w) = a(w, z_h) − π_h m(w, z_h)` per cell.
fn localized_adjoint<T: Real>(problem: &EigenProblem<T>, sol: &EigenSolution<T>, w: &FeFunction<T>) -> Result<Vec<T>> {
    let form = problem.shifted_form(sol.pi_h);
    let data = ResidualData::new(&form, &problem.dirichlet_tags);
    Ok(residual::localize_adjoint(&data, &sol.u_h, &sol.z_h, w)?.into_iter().map(|v| -v).collect())
}

/// `½ρ(u_h, λ_h)(I*z − z_h) + ½ρ*(z_h, π_h)(I*u − u_h)` with cell indicators.
/// The second-order remainder is not added.
pub fn eigen_error_estimate<T: Real>(
    problem: &EigenProblem<T>,
    sol: &EigenSolution<T>,
    recovered_u: Option<&FeFunction<T>>,
    recovered_z: Option<&FeFunction<T>>,
) -> Result<ErrorEstimate<T>> {
    let (Some(ru), Some(rz)) = (recovered_u, recovered_z) else {
        return Err(Error::Usage("the eigenvalue estimate needs both recovered eigenfunctions".into()));
    };
    let w_z = recovery_weight(&sol.z_h, rz, &problem.dirichlet_tags)?;
    let w_u = recovery_weight(&sol.u_h, ru, &problem.dirichlet_tags)?;
    let primal = localized_primal(problem, sol, &w_z)?;
    let dual = localized_adjoint(problem, sol, &w_u)?;
    let signed: Vec<T> = primal.iter().zip(&dual).map(|(&p, &d)| T::half() * (p + d)).collect();
    let half_sum = |v: &[T]| T::half() * v.iter().copied().sum::<T>();
    Ok(ErrorEstimate::from_signed(
        sol.u_h.mesh().active_cells().to_vec(),
        &signed,
        half_sum(&primal),
        Some(half_sum(&dual)),
    ))
}

/// Weak-form evaluation of `½ρ(u_h, λ_h)(w_z) + ½ρ*(z_h, π_h)(w_u)` for
/// weights on any space of the same mesh.
pub fn weighted_eigen_residuals<T: Real>(
    problem: &EigenProblem<T>,
    sol: &EigenSolution<T>,
    w_z: &FeFunction<T>,
    w_u: &FeFunction<T>,
) -> Result<(T, T)> {
    let primal_form = problem.shifted_form(sol.lambda_h);
    let adjoint_form = problem.shifted_form(sol.pi_h);
    let p = residual::weak_primal(&ResidualData::new(&primal_form, &problem.dirichlet_tags), &sol.u_h, w_z)?;
    let d = residual::weak_adjoint(&ResidualData::new(&adjoint_form, &problem.dirichlet_tags), &sol.u_h, &sol.z_h, w_u)?;
    Ok((-T::half() * p, -T::half() * d))
}

/// The estimate with weights `v − I_h v` taken from a reference solution on
/// a uniformly refined mesh, and the diagnostic remainder
/// `½(λ − λ_h) m(u − u_h, z − z_h)` against the same reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceComparison<T> {
    pub estimate: T,
    pub remainder: T,
}

/// Compares `sol` with `reference`, which must live on a uniform refinement
/// of `sol`'s mesh; `lambda` is the eigenvalue used in the remainder.
pub fn compare_with_reference<T: Real>(
    problem: &EigenProblem<T>,
    sol: &EigenSolution<T>,
    reference: &EigenSolution<T>,
    lambda: T,
) -> Result<ReferenceComparison<T>> {
    let fine = reference.u_h.space();
    let lift = |f: &FeFunction<T>| f.interpolate_into(fine);
    let weight = |v: &FeFunction<T>| -> Result<FeFunction<T>> {
        let coarse = v.interpolate_into(sol.u_h.space())?;
        v.difference(&lift(&coarse)?)
    };
    let fine_sol = EigenSolution { u_h: lift(&sol.u_h)?, z_h: lift(&sol.z_h)?, ..sol.clone() };
    let (p, d) = weighted_eigen_residuals(problem, &fine_sol, &weight(&reference.z_h)?, &weight(&reference.u_h)?)?;
    let e_u = reference.u_h.difference(&fine_sol.u_h)?;
    let e_z = reference.z_h.difference(&fine_sol.z_h)?;
    let remainder = T::half() * (lambda - sol.lambda_h) * mass_product(problem, &e_u, &e_z)?;
    Ok(ReferenceComparison { estimate: p + d, remainder })
}
