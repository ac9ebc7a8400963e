//! Neumann boundary control of a linear state equation with a tracking cost,
//! and the three-residual estimator for the cost functional.
//!
//! The state solves `a(u)(ψ) + b(q, ψ) = 0` with `a(u)(ψ) = (∇u, ∇ψ) + (u, ψ)`
//! and `b(q, ψ) = −(q, ψ)_Γc`, i.e. `∂ₙu = q` on the control boundary `Γc`.
//! The cost is `J(u, q) = ½‖u − û‖²_Ωo + α/2 ‖q‖²_Γc`.

use std::sync::Arc;

use crate::dwr::residual::{self, ResidualData};
use crate::dwr::solve::{linear_tol, solve_linear};
use crate::dwr::ErrorEstimate;
use crate::error::{Error, Result};
use crate::fem::assembly::{
    assemble_load, assemble_operator, assemble_operator_with, cell_quadrature, segment_quadrature, AssemblyOptions,
    ScalarField,
};
use crate::fem::element::reference_basis;
use crate::fem::recovery::recovery_weight;
use crate::fem::{patch_recover, FeFunction, FeSpace, FormDescriptor, FormTerm};
use crate::linalg::{solve_gmres_with, SolverReport, SparseMatrix};
use crate::mesh::{BoundaryTag, Face, Mesh, LEFT};
use crate::problems::{ProblemDefinition, ProblemKind};
use crate::{Point, Real};

#[derive(Clone)]
pub struct ControlProblem<T> {
    pub state: FormDescriptor<T>,
    pub control_tag: BoundaryTag,
    /// Axis-aligned observation rectangle `Ωo`.
    pub observation: [Point<T>; 2],
    pub target: ScalarField<T>,
    pub alpha: T,
}

impl<T: std::fmt::Debug> std::fmt::Debug for ControlProblem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlProblem")
            .field("state", &self.state)
            .field("control_tag", &self.control_tag)
            .field("observation", &self.observation)
            .field("alpha", &self.alpha)
            .finish_non_exhaustive()
    }
}

impl<T: Real> ControlProblem<T> {
    /// `−Δu + u = 0` on the unit square, control on the left edge, tracking
    /// of `û = (1 + x) sin(πy) / 2` on the right half, `α = 0.01`.
    pub fn standard() -> Self {
        let pi = T::PI();
        Self {
            state: FormDescriptor::new(vec![FormTerm::Stiffness(T::one()), FormTerm::Mass(T::one())]),
            control_tag: LEFT,
            observation: [[T::half(), T::zero()], [T::one(), T::one()]],
            target: Arc::new(move |x: Point<T>| (T::one() + x[0]) * (pi * x[1]).sin() * T::half()),
            alpha: T::lit(0.01),
        }
    }

    /// The standard problem with the state form of a registered control
    /// problem.
    pub fn from_definition(problem: &ProblemDefinition<T>) -> Result<Self> {
        match problem.kind {
            ProblemKind::Control => Ok(Self { state: problem.form.clone(), ..Self::standard() }),
            _ => Err(Error::Usage(format!("{} is not a control problem", problem.name))),
        }
    }

    pub fn with_target(mut self, target: ScalarField<T>) -> Self {
        self.target = target;
        self
    }

    pub fn with_alpha(mut self, alpha: T) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) {
            return Err(Error::Domain("control regularization must be positive".into()));
        }
        if self.state.is_nonlinear() {
            return Err(Error::Usage("the control module handles linear states only".into()));
        }
        Ok(())
    }

    fn observed(&self, x: Point<T>) -> bool {
        let [lo, hi] = self.observation;
        x[0] >= lo[0] && x[0] <= hi[0] && x[1] >= lo[1] && x[1] <= hi[1]
    }

    fn on_control(&self, face: &Face) -> bool {
        face.outer.is_none() && face.tag == Some(self.control_tag)
    }
}

/// Assembled pieces of the optimality system on one space.
pub struct KktSystem<T> {
    pub space: Arc<FeSpace<T>>,
    /// State operator.
    pub a: SparseMatrix<T>,
    /// `(φⱼ, φᵢ)_Γc`.
    pub boundary_mass: SparseMatrix<T>,
    /// `(φⱼ, φᵢ)_Ωo`.
    pub observation_mass: SparseMatrix<T>,
    /// `(û, φᵢ)_Ωo`.
    pub observation_load: Vec<T>,
    /// Dofs on `Γc`; the control space is spanned by their basis traces.
    pub control_dofs: Vec<usize>,
}

fn boundary_mass<T: Real>(cp: &ControlProblem<T>, space: &FeSpace<T>) -> SparseMatrix<T> {
    let mesh = space.mesh();
    let mut triplets = Vec::new();
    for face in mesh.faces().iter().filter(|f| cp.on_control(f)) {
        let c = face.inner.cell;
        let dofs = space.cell_dofs(c);
        for (x, ds) in segment_quadrature(mesh.vertex(face.vertices[0]), mesh.vertex(face.vertices[1])) {
            let vals = reference_basis(space.degree(), mesh.map_to_reference(c, x)).values;
            for (i, &di) in dofs.iter().enumerate() {
                for (j, &dj) in dofs.iter().enumerate() {
                    let v = vals[i] * vals[j] * ds;
                    if v != T::zero() {
                        triplets.push((di, dj, v));
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(space.dof_count(), space.dof_count(), triplets)
}

pub fn assemble_kkt<T: Real>(cp: &ControlProblem<T>, space: &Arc<FeSpace<T>>) -> Result<KktSystem<T>> {
    cp.validate()?;
    let a = assemble_operator(space, &cp.state, None)?;
    let lo = cp.observation[0];
    let hi = cp.observation[1];
    let indicator: ScalarField<T> = Arc::new(move |x: Point<T>| {
        if x[0] >= lo[0] && x[0] <= hi[0] && x[1] >= lo[1] && x[1] <= hi[1] {
            T::one()
        } else {
            T::zero()
        }
    });
    let observation = FormDescriptor::new(vec![FormTerm::Reaction(indicator)]);
    let observation_mass = assemble_operator_with(
        space,
        &observation,
        None,
        AssemblyOptions { constrained_diagonal: T::zero(), ..Default::default() },
    )?;
    let target = cp.target.clone();
    let observation_load = assemble_load(space, |x| if cp.observed(x) { target(x) } else { T::zero() });
    let control_dofs = space.dofs_with_tags(&[cp.control_tag]);
    if control_dofs.is_empty() {
        return Err(Error::Usage("the mesh has no control boundary".into()));
    }
    Ok(KktSystem { space: space.clone(), a, boundary_mass: boundary_mass(cp, space), observation_mass, observation_load, control_dofs })
}

#[derive(Debug, Clone)]
pub struct KktSolution<T> {
    pub u_h: FeFunction<T>,
    /// Control as a function of the state space; only its trace on `Γc` is
    /// meaningful, interior coefficients are zero.
    pub q_h: FeFunction<T>,
    pub z_h: FeFunction<T>,
    /// Report of the outer GMRES on the reduced control system.
    pub report: SolverReport,
}

impl<T: Real> KktSystem<T> {
    fn state(&self, q: &[T]) -> Result<Vec<T>> {
        solve_linear(&self.a, &self.boundary_mass.mul_vec(q), true, "state solve")
    }

    fn adjoint(&self, u: &[T]) -> Result<Vec<T>> {
        let rhs: Vec<T> =
            self.observation_mass.mul_vec(u).iter().zip(&self.observation_load).map(|(&m, &l)| m - l).collect();
        solve_linear(&self.a, &rhs, true, "adjoint solve")
    }

    fn extend(&self, qc: &[T]) -> Vec<T> {
        let mut q = vec![T::zero(); self.space.dof_count()];
        for (&d, &v) in self.control_dofs.iter().zip(qc) {
            q[d] = v;
        }
        q
    }

    /// `α(q, χ)_Γc + (z, χ)_Γc` for the control basis functions `χ`.
    fn gradient(&self, alpha: T, q: &[T], z: &[T]) -> Vec<T> {
        let bq = self.boundary_mass.mul_vec(q);
        let bz = self.boundary_mass.mul_vec(z);
        self.control_dofs.iter().map(|&d| alpha * bq[d] + bz[d]).collect()
    }

    /// Max-norms of the state, adjoint and gradient residual blocks.
    pub fn residuals(&self, alpha: T, u: &[T], q: &[T], z: &[T]) -> [T; 3] {
        let max = |v: &[T]| v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let au = self.a.mul_vec(u);
        let bq = self.boundary_mass.mul_vec(q);
        let state: Vec<T> = au.iter().zip(&bq).map(|(&x, &y)| x - y).collect();
        let az = self.a.mul_vec(z);
        let mu = self.observation_mass.mul_vec(u);
        let adjoint: Vec<T> =
            az.iter().zip(&mu).zip(&self.observation_load).map(|((&x, &m), &l)| x - m + l).collect();
        let mut state_free = state;
        let mut adjoint_free = adjoint;
        for &d in self.space.constraints().keys() {
            state_free[d] = T::zero();
            adjoint_free[d] = T::zero();
        }
        [max(&state_free), max(&adjoint_free), max(&self.gradient(alpha, q, z))]
    }
}

/// Solves the optimality system on the Q1 space of `mesh`.
///
/// State and adjoint are eliminated, leaving the reduced control system
/// `(α B + Bᵀ A⁻¹ M A⁻¹ B) q = −Bᵀ A⁻¹ ℓ` on the `Γc` dofs. It is solved by
/// GMRES with the operator applied through inner state and adjoint solves.
pub fn solve_kkt<T: Real>(cp: &ControlProblem<T>, mesh: Arc<Mesh<T>>) -> Result<KktSolution<T>> {
    let space = FeSpace::build(mesh, 1);
    let sys = assemble_kkt(cp, &space)?;
    let zero = vec![T::zero(); space.dof_count()];
    let z0 = sys.adjoint(&zero)?;
    let rhs: Vec<T> = sys.gradient(cp.alpha, &zero, &z0).into_iter().map(|g| -g).collect();
    let mut inner_failure = None;
    let apply = |qc: &[T], out: &mut [T]| {
        let q = sys.extend(qc);
        let applied = sys.state(&q).and_then(|u| sys.adjoint(&u));
        match applied {
            Ok(z) => {
                // the affine part z0 is removed to obtain the linear operator
                let z_lin: Vec<T> = z.iter().zip(&z0).map(|(&a, &b)| a - b).collect();
                out.copy_from_slice(&sys.gradient(cp.alpha, &q, &z_lin));
            }
            Err(e) => {
                out.iter_mut().for_each(|v| *v = T::zero());
                inner_failure.get_or_insert(e);
            }
        }
    };
    let diag = sys.boundary_mass.diagonal();
    let inv_diag: Vec<T> = sys.control_dofs.iter().map(|&d| T::one() / (cp.alpha * diag[d])).collect();
    let nc = sys.control_dofs.len();
    let (qc, report) = solve_gmres_with(apply, &inv_diag, &rhs, linear_tol::<T>() * T::lit(0.1), nc, 20 * nc + 200);
    if let Some(e) = inner_failure {
        return Err(e);
    }
    if !report.converged {
        return Err(Error::NotConverged { context: "reduced control system".into(), report });
    }
    let q = sys.extend(&qc);
    let u = sys.state(&q)?;
    let z = sys.adjoint(&u)?;
    Ok(KktSolution {
        u_h: FeFunction::from_coefficients(space.clone(), u),
        q_h: FeFunction::from_coefficients(space.clone(), q),
        z_h: FeFunction::from_coefficients(space, z),
        report,
    })
}

/// The state belonging to a given control (used for sensitivity checks).
pub fn state_for_control<T: Real>(cp: &ControlProblem<T>, q: &FeFunction<T>) -> Result<FeFunction<T>> {
    let sys = assemble_kkt(cp, q.space())?;
    Ok(FeFunction::from_coefficients(q.space().clone(), sys.state(q.coefficients())?))
}

/// Reduced gradient `α(q, χ)_Γc + (z(q), χ)_Γc` at an arbitrary control, in
/// the order of the `Γc` dofs.
pub fn reduced_gradient<T: Real>(cp: &ControlProblem<T>, q: &FeFunction<T>) -> Result<Vec<T>> {
    let sys = assemble_kkt(cp, q.space())?;
    let u = sys.state(q.coefficients())?;
    let z = sys.adjoint(&u)?;
    Ok(sys.gradient(cp.alpha, q.coefficients(), &z))
}

pub fn kkt_residuals<T: Real>(cp: &ControlProblem<T>, sol: &KktSolution<T>) -> Result<[T; 3]> {
    let sys = assemble_kkt(cp, sol.u_h.space())?;
    Ok(sys.residuals(cp.alpha, sol.u_h.coefficients(), sol.q_h.coefficients(), sol.z_h.coefficients()))
}

/// `J(u, q)` by cell and face quadrature.
pub fn cost<T: Real>(cp: &ControlProblem<T>, u: &FeFunction<T>, q: &FeFunction<T>) -> Result<T> {
    let space = u.space();
    let mesh = space.mesh();
    let mut tracking = T::zero();
    for &c in mesh.active_cells() {
        for (basis, jxw) in cell_quadrature(space, c).points {
            if cp.observed(basis.x) {
                let d = u.sample_with(c, &basis).value - (cp.target)(basis.x);
                tracking += d * d * jxw;
            }
        }
    }
    let control = boundary_integral(cp, mesh, |c, xi, _| {
        let v = q.value_at(c, xi);
        v * v
    });
    Ok(T::half() * tracking + T::half() * cp.alpha * control.iter().copied().sum::<T>())
}

/// Per active cell, `∫ f ds` over its faces on `Γc`.
fn boundary_integral<T: Real>(cp: &ControlProblem<T>, mesh: &Mesh<T>, f: impl Fn(usize, Point<T>, Point<T>) -> T) -> Vec<T> {
    let mut pos = vec![usize::MAX; mesh.cells().len()];
    for (i, &c) in mesh.active_cells().iter().enumerate() {
        pos[c] = i;
    }
    let mut out = vec![T::zero(); mesh.n_active()];
    for face in mesh.faces().iter().filter(|f| cp.on_control(f)) {
        let c = face.inner.cell;
        for (x, ds) in segment_quadrature(mesh.vertex(face.vertices[0]), mesh.vertex(face.vertices[1])) {
            out[pos[c]] += f(c, mesh.map_to_reference(c, x), x) * ds;
        }
    }
    out
}

/// Higher-order reconstructions of the discrete triple.
#[derive(Debug, Clone)]
pub struct Recovered<T> {
    pub u: FeFunction<T>,
    /// On `Γc` this is the quadratic through the three nodal values of each
    /// parent edge.
    pub q: FeFunction<T>,
    pub z: FeFunction<T>,
}

pub fn recover<T: Real>(sol: &KktSolution<T>) -> Result<Recovered<T>> {
    Ok(Recovered { u: patch_recover(&sol.u_h)?, q: patch_recover(&sol.q_h)?, z: patch_recover(&sol.z_h)? })
}

/// The estimate with the control residual reported separately.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlEstimate<T> {
    /// `primal_part = ½ρ(u_h)(w_z)`, `dual_part = ½ρ*(z_h)(w_u)`.
    pub estimate: ErrorEstimate<T>,
    /// `½ρ^q(q_h)(w_q)`.
    pub control_part: T,
}

/// The three weighted residuals `[ρ*(z_h)(w_u), ρ^q(q_h)(w_q), ρ(u_h)(w_z)]`
/// in weak form, for weights on a space of the solution's mesh.
pub fn weighted_residuals<T: Real>(
    cp: &ControlProblem<T>,
    sol: &KktSolution<T>,
    w_u: &FeFunction<T>,
    w_q: &FeFunction<T>,
    w_z: &FeFunction<T>,
) -> Result<[T; 3]> {
    let (u, q, z) = (&sol.u_h, &sol.q_h, &sol.z_h);
    let tracking = |c: usize, xi: Point<T>, x: Point<T>| {
        if cp.observed(x) {
            u.value_at(c, xi) - (cp.target)(x)
        } else {
            T::zero()
        }
    };
    let control = |c: usize, xi: Point<T>, x: Point<T>| if x[0] <= T::zero() { q.value_at(c, xi) } else { T::zero() };
    let adjoint = ResidualData { density: Some(&tracking), ..ResidualData::new(&cp.state, &[]) };
    let primal = ResidualData { neumann: Some(&control), ..ResidualData::new(&cp.state, &[]) };
    let rho_star = residual::weak_adjoint(&adjoint, u, z, w_u)?;
    let rho = residual::weak_primal(&primal, u, w_z)?;
    let rho_q = boundary_integral(cp, u.mesh(), |c, xi, _| {
        (cp.alpha * q.value_at(c, xi) + z.value_at(c, xi)) * w_q.value_at(c, xi)
    });
    Ok([rho_star, rho_q.into_iter().sum(), rho])
}

/// `½[ρ*(z_h)(w_u) + ρ^q(q_h)(w_q) + ρ(u_h)(w_z)]` with `w = I*v − v_h`,
/// localized to cells. Only the discrete triple and its recoveries are used;
/// no equation is solved.
pub fn control_error_estimate<T: Real>(
    cp: &ControlProblem<T>,
    sol: &KktSolution<T>,
    recovered: Option<&Recovered<T>>,
) -> Result<ControlEstimate<T>> {
    let rec = recovered.ok_or_else(|| Error::Usage("the control estimate needs recovered u, q and z".into()))?;
    let (u, q, z) = (&sol.u_h, &sol.q_h, &sol.z_h);
    if cp.control_tag != LEFT {
        return Err(Error::Usage("control boundary must be the left edge".into()));
    }
    let w_u = recovery_weight(u, &rec.u, &[])?;
    let w_q = recovery_weight(q, &rec.q, &[])?;
    let w_z = recovery_weight(z, &rec.z, &[])?;
    let tracking = |c: usize, xi: Point<T>, x: Point<T>| {
        if cp.observed(x) {
            u.value_at(c, xi) - (cp.target)(x)
        } else {
            T::zero()
        }
    };
    // Γc is x = 0; face quadrature points elsewhere have x > 0
    let control = |c: usize, xi: Point<T>, x: Point<T>| if x[0] <= T::zero() { q.value_at(c, xi) } else { T::zero() };
    let adjoint = ResidualData { density: Some(&tracking), ..ResidualData::new(&cp.state, &[]) };
    let primal = ResidualData { neumann: Some(&control), ..ResidualData::new(&cp.state, &[]) };
    let rho_star = residual::localize_adjoint(&adjoint, u, z, &w_u)?;
    let rho = residual::localize_primal(&primal, u, &w_z)?;
    let rho_q = boundary_integral(cp, u.mesh(), |c, xi, _| {
        (cp.alpha * q.value_at(c, xi) + z.value_at(c, xi)) * w_q.value_at(c, xi)
    });
    let signed: Vec<T> = (0..rho.len()).map(|k| T::half() * (rho_star[k] + rho_q[k] + rho[k])).collect();
    let half_sum = |v: &[T]| T::half() * v.iter().copied().sum::<T>();
    Ok(ControlEstimate {
        estimate: ErrorEstimate::from_signed(u.mesh().active_cells().to_vec(), &signed, half_sum(&rho), Some(half_sum(&rho_star))),
        control_part: half_sum(&rho_q),
    })
}

/// Optimal cost on `mesh` refined `refinements` times uniformly.
pub fn reference_cost<T: Real>(cp: &ControlProblem<T>, mesh: &Mesh<T>, refinements: usize) -> Result<T> {
    let fine = (0..refinements).fold(mesh.clone(), |m, _| m.refine_uniform());
    let sol = solve_kkt(cp, Arc::new(fine))?;
    cost(cp, &sol.u_h, &sol.q_h)
}

/// Admissibility pass: the cost of the discrete control with the state
/// re-solved on `sol`'s mesh refined `refinements` times.
pub fn enriched_cost<T: Real>(cp: &ControlProblem<T>, sol: &KktSolution<T>, refinements: usize) -> Result<T> {
    let fine = (0..refinements).fold((**sol.u_h.mesh()).clone(), |m, _| m.refine_uniform());
    let space = FeSpace::build(Arc::new(fine), 1);
    let q = sol.q_h.interpolate_into(&space)?;
    let u = state_for_control(cp, &q)?;
    cost(cp, &u, &q)
}
