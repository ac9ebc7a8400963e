use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::function::{physical_basis, FeFunction, PhysicalBasis, Sample};
use super::quadrature::{gauss_1d, gauss_square};
use super::space::FeSpace;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::mesh::BoundaryTag;
use crate::problems::GoalFunctional;
use crate::{Point, Real};

/// Points per direction of every cell and face rule. Exact for all
/// polynomial integrands that occur with Q1/Q2 fields on affine cells,
/// including the cubic nonlinearity.
pub const QUAD_POINTS: usize = 3;

pub type VectorField<T> = Arc<dyn Fn(Point<T>) -> [T; 2] + Send + Sync>;
pub type ScalarField<T> = Arc<dyn Fn(Point<T>) -> T + Send + Sync>;
/// Bilinear kernel `k(x, trial, test)`.
pub type CellKernel<T> = Arc<dyn Fn(Point<T>, &Sample<T>, &Sample<T>) -> T + Send + Sync>;

/// One additive term of a (semi-)linear form `a(u)(ψ)`.
#[derive(Clone)]
pub enum FormTerm<T> {
    /// `c (u, ψ)`
    Mass(T),
    /// `ν (∇u, ∇ψ)`
    Stiffness(T),
    /// `(β·∇u, ψ)`; `β` must be divergence free.
    Advection(VectorField<T>),
    /// `(c u, ψ)`
    Reaction(ScalarField<T>),
    /// `κ (u³, ψ)`
    SemilinearCubic(T),
    /// User kernel; has no strong form, so it cannot be localized.
    Custom(CellKernel<T>),
}

impl<T: fmt::Debug> fmt::Debug for FormTerm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormTerm::Mass(c) => write!(f, "Mass({c:?})"),
            FormTerm::Stiffness(nu) => write!(f, "Stiffness({nu:?})"),
            FormTerm::Advection(_) => write!(f, "Advection(..)"),
            FormTerm::Reaction(_) => write!(f, "Reaction(..)"),
            FormTerm::SemilinearCubic(k) => write!(f, "SemilinearCubic({k:?})"),
            FormTerm::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Sum of form terms; linear in the test function, possibly nonlinear in `u`.
#[derive(Debug, Clone, Default)]
pub struct FormDescriptor<T> {
    pub terms: Vec<FormTerm<T>>,
}

impl<T: Real> FormDescriptor<T> {
    pub fn new(terms: Vec<FormTerm<T>>) -> Self {
        Self { terms }
    }

    pub fn mass() -> Self {
        Self::new(vec![FormTerm::Mass(T::one())])
    }

    pub fn stiffness() -> Self {
        Self::new(vec![FormTerm::Stiffness(T::one())])
    }

    pub fn is_nonlinear(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, FormTerm::SemilinearCubic(_)))
    }

    pub fn is_symmetric(&self) -> bool {
        !self.terms.iter().any(|t| matches!(t, FormTerm::Advection(_) | FormTerm::Custom(_)))
    }

    pub fn scaled(&self, s: T) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| match t {
                FormTerm::Mass(c) => FormTerm::Mass(*c * s),
                FormTerm::Stiffness(nu) => FormTerm::Stiffness(*nu * s),
                FormTerm::Advection(b) => {
                    let b = b.clone();
                    FormTerm::Advection(Arc::new(move |x| b(x).map(|v| v * s)))
                }
                FormTerm::Reaction(c) => {
                    let c = c.clone();
                    FormTerm::Reaction(Arc::new(move |x| c(x) * s))
                }
                FormTerm::SemilinearCubic(k) => FormTerm::SemilinearCubic(*k * s),
                FormTerm::Custom(k) => {
                    let k = k.clone();
                    FormTerm::Custom(Arc::new(move |x, a, b| k(x, a, b) * s))
                }
            })
            .collect();
        Self { terms }
    }

    /// Total diffusion coefficient.
    pub fn diffusion(&self) -> T {
        self.terms.iter().map(|t| if let FormTerm::Stiffness(nu) = t { *nu } else { T::zero() }).sum()
    }

    pub fn advection(&self, x: Point<T>) -> [T; 2] {
        let mut b = [T::zero(); 2];
        for t in &self.terms {
            if let FormTerm::Advection(f) = t {
                let v = f(x);
                b[0] += v[0];
                b[1] += v[1];
            }
        }
        b
    }

    /// Integrand of `a(u)(ψ)`.
    pub fn integrand(&self, x: Point<T>, u: &Sample<T>, psi: &Sample<T>) -> T {
        self.terms
            .iter()
            .map(|t| match t {
                FormTerm::Mass(c) => *c * u.value * psi.value,
                FormTerm::Stiffness(nu) => *nu * (u.grad[0] * psi.grad[0] + u.grad[1] * psi.grad[1]),
                FormTerm::Advection(b) => {
                    let b = b(x);
                    (b[0] * u.grad[0] + b[1] * u.grad[1]) * psi.value
                }
                FormTerm::Reaction(c) => c(x) * u.value * psi.value,
                FormTerm::SemilinearCubic(k) => *k * u.value.powi(3) * psi.value,
                FormTerm::Custom(k) => k(x, u, psi),
            })
            .sum()
    }

    /// Integrand of the linearization `a′(u)(φ, ψ)`.
    pub fn linearized_integrand(&self, x: Point<T>, u: &Sample<T>, phi: &Sample<T>, psi: &Sample<T>) -> T {
        self.terms
            .iter()
            .map(|t| match t {
                FormTerm::SemilinearCubic(k) => T::lit(3.0) * *k * u.value * u.value * phi.value * psi.value,
                other => FormDescriptor { terms: vec![other.clone()] }.integrand(x, phi, psi),
            })
            .sum()
    }

    /// Strong operator `L(u)` with `a(u)(ψ) = (L(u), ψ) + (ν∂ₙu, ψ)_∂`.
    pub fn strong(&self, x: Point<T>, u: &Sample<T>) -> Option<T> {
        let mut acc = T::zero();
        for t in &self.terms {
            acc += match t {
                FormTerm::Mass(c) => *c * u.value,
                FormTerm::Stiffness(nu) => -*nu * u.laplacian,
                FormTerm::Advection(b) => {
                    let b = b(x);
                    b[0] * u.grad[0] + b[1] * u.grad[1]
                }
                FormTerm::Reaction(c) => c(x) * u.value,
                FormTerm::SemilinearCubic(k) => *k * u.value.powi(3),
                FormTerm::Custom(_) => return None,
            };
        }
        Some(acc)
    }

    /// Strong adjoint of the linearization at `u`, applied to `z`:
    /// `a′(u)(φ, z) = (φ, L′(u)*z) + (φ, ν∂ₙz + β·n z)_∂`.
    pub fn strong_adjoint(&self, x: Point<T>, u: &Sample<T>, z: &Sample<T>) -> Option<T> {
        let mut acc = T::zero();
        for t in &self.terms {
            acc += match t {
                FormTerm::Mass(c) => *c * z.value,
                FormTerm::Stiffness(nu) => -*nu * z.laplacian,
                FormTerm::Advection(b) => {
                    let b = b(x);
                    -(b[0] * z.grad[0] + b[1] * z.grad[1])
                }
                FormTerm::Reaction(c) => c(x) * z.value,
                FormTerm::SemilinearCubic(k) => T::lit(3.0) * *k * u.value * u.value * z.value,
                FormTerm::Custom(_) => return None,
            };
        }
        Some(acc)
    }
}

/// Quadrature data of one active cell.
pub struct CellQuadrature<T> {
    pub cell: usize,
    pub points: Vec<(PhysicalBasis<T>, T)>,
}

/// Physical basis and `|J|·w` at every cell quadrature point.
pub fn cell_quadrature<T: Real>(space: &FeSpace<T>, cell: usize) -> CellQuadrature<T> {
    let mesh = space.mesh();
    let points = gauss_square::<T>(QUAD_POINTS)
        .into_iter()
        .map(|(xi, w)| {
            let b = physical_basis(mesh, cell, space.degree(), xi);
            let jxw = b.det.abs() * w;
            (b, jxw)
        })
        .collect();
    CellQuadrature { cell, points }
}

/// Physical Gauss points `(x, ds)` along the segment between two vertices.
pub fn segment_quadrature<T: Real>(a: Point<T>, b: Point<T>) -> Vec<(Point<T>, T)> {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    gauss_1d::<T>(QUAD_POINTS)
        .into_iter()
        .map(|(t, w)| ([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], w * len))
        .collect()
}

fn basis_sample<T: Real>(b: &PhysicalBasis<T>, i: usize) -> Sample<T> {
    Sample { value: b.values[i], grad: b.grads[i], laplacian: b.laplacians[i] }
}

/// Assembly variants beyond the plain operator.
#[derive(Debug, Clone, Copy)]
pub struct AssemblyOptions<T> {
    /// Assemble `a′(u)(ψᵢ, φⱼ)` into entry `(i, j)`, i.e. the adjoint operator.
    pub transpose: bool,
    /// Diagonal placed on rows of constrained dofs.
    pub constrained_diagonal: T,
}

impl<T: Real> Default for AssemblyOptions<T> {
    fn default() -> Self {
        Self { transpose: false, constrained_diagonal: T::one() }
    }
}

/// Matrix of the (linearized) form: entry `(i, j) = a′(u)(φⱼ, φᵢ)`, with
/// hanging-node constraints condensed into the master rows and columns.
pub fn assemble_operator<T: Real>(
    space: &FeSpace<T>,
    form: &FormDescriptor<T>,
    linearization_point: Option<&FeFunction<T>>,
) -> Result<SparseMatrix<T>> {
    assemble_operator_with(space, form, linearization_point, AssemblyOptions::default())
}

/// Transposed operator of the linearized form, assembled directly.
pub fn assemble_adjoint_operator<T: Real>(
    space: &FeSpace<T>,
    form: &FormDescriptor<T>,
    linearization_point: Option<&FeFunction<T>>,
) -> Result<SparseMatrix<T>> {
    assemble_operator_with(space, form, linearization_point, AssemblyOptions { transpose: true, ..Default::default() })
}

pub fn assemble_operator_with<T: Real>(
    space: &FeSpace<T>,
    form: &FormDescriptor<T>,
    linearization_point: Option<&FeFunction<T>>,
    options: AssemblyOptions<T>,
) -> Result<SparseMatrix<T>> {
    if form.is_nonlinear() && linearization_point.is_none() {
        return Err(Error::Usage("nonlinear form needs a linearization point".into()));
    }
    if let Some(u) = linearization_point {
        if !Arc::ptr_eq(u.mesh(), space.mesh()) {
            return Err(Error::Usage("linearization point lives on another mesh".into()));
        }
    }
    let n = space.dof_count();
    let mut triplets = Vec::new();
    let resolved: BTreeMap<usize, Vec<(usize, T)>> = space.constraints().keys().map(|&d| (d, space.resolve(d))).collect();
    let expand = |d: usize| -> Vec<(usize, T)> { resolved.get(&d).cloned().unwrap_or_else(|| vec![(d, T::one())]) };
    for &c in space.mesh().active_cells() {
        let dofs = space.cell_dofs(c);
        let nl = dofs.len();
        let mut local = vec![T::zero(); nl * nl];
        for (basis, jxw) in cell_quadrature(space, c).points {
            let u = linearization_point.map(|f| f.sample_with(c, &basis)).unwrap_or_else(Sample::zero);
            if !basis.x.iter().all(|v| v.is_finite()) {
                return Err(Error::Data("non-finite quadrature point".into()));
            }
            for i in 0..nl {
                let psi = basis_sample(&basis, i);
                for j in 0..nl {
                    let phi = basis_sample(&basis, j);
                    let v = form.linearized_integrand(basis.x, &u, &phi, &psi);
                    if !v.is_finite() {
                        return Err(Error::Data(format!("form coefficient not evaluable at cell {c}")));
                    }
                    local[i * nl + j] += v * jxw;
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                let v = local[i * nl + j];
                let (r, col) = if options.transpose { (dofs[j], dofs[i]) } else { (dofs[i], dofs[j]) };
                for &(gr, wr) in &expand(r) {
                    for &(gc, wc) in &expand(col) {
                        triplets.push((gr, gc, wr * wc * v));
                    }
                }
            }
        }
    }
    for &d in space.constraints().keys() {
        triplets.push((d, d, options.constrained_diagonal));
    }
    Ok(SparseMatrix::from_triplets(n, n, triplets))
}

/// `(f, φᵢ)` with constraints condensed.
pub fn assemble_load<T: Real>(space: &FeSpace<T>, f: impl Fn(Point<T>) -> T) -> Vec<T> {
    let mut v = vec![T::zero(); space.dof_count()];
    for &c in space.mesh().active_cells() {
        let dofs = space.cell_dofs(c);
        for (basis, jxw) in cell_quadrature(space, c).points {
            let fx = f(basis.x) * jxw;
            for (i, &d) in dofs.iter().enumerate() {
                v[d] += fx * basis.values[i];
            }
        }
    }
    space.condense_vector(&mut v);
    v
}

/// `(g, φᵢ)_Γ` over boundary faces carrying `tag`, constraints condensed.
pub fn assemble_boundary_load<T: Real>(space: &FeSpace<T>, tag: BoundaryTag, g: impl Fn(Point<T>) -> T) -> Vec<T> {
    let mesh = space.mesh();
    let mut v = vec![T::zero(); space.dof_count()];
    for face in mesh.faces().iter().filter(|f| f.tag == Some(tag)) {
        let c = face.inner.cell;
        let dofs = space.cell_dofs(c);
        for (x, ds) in segment_quadrature(mesh.vertex(face.vertices[0]), mesh.vertex(face.vertices[1])) {
            let xi = mesh.map_to_reference(c, x);
            let vals = super::element::reference_basis(space.degree(), xi).values;
            let gx = g(x) * ds;
            for (i, &d) in dofs.iter().enumerate() {
                v[d] += gx * vals[i];
            }
        }
    }
    space.condense_vector(&mut v);
    v
}

/// `a(u)(φᵢ)` without source terms, constraints condensed.
pub fn assemble_form_residual<T: Real>(space: &FeSpace<T>, form: &FormDescriptor<T>, u: &FeFunction<T>) -> Vec<T> {
    let mut v = vec![T::zero(); space.dof_count()];
    for &c in space.mesh().active_cells() {
        let dofs = space.cell_dofs(c);
        for (basis, jxw) in cell_quadrature(space, c).points {
            let us = u.sample_with(c, &basis);
            for (i, &d) in dofs.iter().enumerate() {
                v[d] += form.integrand(basis.x, &us, &basis_sample(&basis, i)) * jxw;
            }
        }
    }
    space.condense_vector(&mut v);
    v
}

/// `J′(u)(φᵢ)` for a linear goal, constraints condensed.
pub fn assemble_functional<T: Real>(
    space: &FeSpace<T>,
    goal: &GoalFunctional<T>,
    _state: Option<&FeFunction<T>>,
) -> Result<Vec<T>> {
    let mut v = vec![T::zero(); space.dof_count()];
    for s in goal.samples(space.mesh())? {
        let vals = super::element::reference_basis(space.degree(), s.xi).values;
        for (i, &d) in space.cell_dofs(s.cell).iter().enumerate() {
            v[d] += s.weight * vals[i];
        }
    }
    space.condense_vector(&mut v);
    Ok(v)
}

/// Symmetric elimination of Dirichlet dofs: their rows become identity rows
/// with the boundary value on the right-hand side, and their columns are
/// moved to the right-hand side of all other rows.
pub fn apply_dirichlet<T: Real>(
    matrix: &SparseMatrix<T>,
    rhs: &[T],
    space: &FeSpace<T>,
    tags: &[BoundaryTag],
    boundary_values: impl Fn(Point<T>) -> T,
) -> (SparseMatrix<T>, Vec<T>) {
    let fixed: BTreeMap<usize, T> =
        space.dofs_with_tags(tags).into_iter().map(|d| (d, boundary_values(space.support_point(d)))).collect();
    apply_fixed_values(matrix, rhs, &fixed)
}

pub fn apply_fixed_values<T: Real>(
    matrix: &SparseMatrix<T>,
    rhs: &[T],
    fixed: &BTreeMap<usize, T>,
) -> (SparseMatrix<T>, Vec<T>) {
    let mut b = rhs.to_vec();
    let mut triplets = Vec::with_capacity(matrix.nnz());
    for (r, c, v) in matrix.triplets() {
        if fixed.contains_key(&r) {
            continue;
        }
        match fixed.get(&c) {
            Some(&g) => b[r] -= v * g,
            None => triplets.push((r, c, v)),
        }
    }
    for (&d, &g) in fixed {
        triplets.push((d, d, T::one()));
        b[d] = g;
    }
    (SparseMatrix::from_triplets(matrix.nrows(), matrix.ncols(), triplets), b)
}

/// Removes rows and columns of the given dofs entirely (used for the
/// eigenvalue form, where boundary rows must not contribute).
pub fn zero_rows_and_cols<T: Real>(matrix: &SparseMatrix<T>, dofs: &[usize]) -> SparseMatrix<T> {
    let set: std::collections::BTreeSet<usize> = dofs.iter().copied().collect();
    let triplets = matrix.triplets().into_iter().filter(|(r, c, _)| !set.contains(r) && !set.contains(c)).collect();
    SparseMatrix::from_triplets(matrix.nrows(), matrix.ncols(), triplets)
}
