//! Registry of benchmark problems, goal functionals and reference values.

mod goal;

use std::fmt;
use std::sync::Arc;

pub use goal::{regularize_point_value, GoalFunctional, GoalKind, GoalSample, RadiusRule};

use crate::error::{Error, Result};
use crate::fem::assembly::ScalarField;
use crate::fem::{FormDescriptor, FormTerm};
use crate::mesh::{BoundaryTag, Mesh, BOTTOM, LEFT, LSHAPE_BOUNDARY, RIGHT, TOP};
use crate::{Point, Real};

/// Point value of the L-shape Poisson solution at `(−0.5, 0.5)`, computed
/// with Q2 elements on a corner-graded mesh (see the `reference_oracles`
/// integration test, which recomputes it).
pub const P1L_POINT_VALUE: f64 = 0.131_052_962_03;

/// Truncation order of the Fourier series for the unit-square Poisson problem.
pub const SERIES_ORDER: usize = 399;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// `(0,1)²` built from an `n × n` grid.
    UnitSquare { n: usize },
    LShape,
}

#[derive(Debug, Clone)]
pub enum ProblemKind<T> {
    /// Semilinear variational equation with a goal functional.
    Stationary,
    /// `a(u, ψ) = λ m(u, ψ)`, target eigenvalue nearest to `shift`.
    Eigen { mass: FormDescriptor<T>, shift: T },
    /// Boundary control problem of the `optctrl` module.
    Control,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceRule<T> {
    Exact(T),
    /// Disc mean of a solution with constant Laplacian:
    /// `point_value + r²/8 · laplacian`.
    DiscMean { point_value: T, laplacian: T },
    /// Computed on a uniformly refined mesh by the problem's pipeline.
    FineMesh { refinements: usize },
}

#[derive(Clone)]
pub struct ProblemDefinition<T> {
    pub name: &'static str,
    pub description: &'static str,
    pub kind: ProblemKind<T>,
    pub geometry: Geometry,
    /// Uniform refinements of the base mesh before the first solve.
    pub initial_refinements: usize,
    pub form: FormDescriptor<T>,
    pub source: ScalarField<T>,
    pub dirichlet_tags: Vec<BoundaryTag>,
    pub dirichlet_value: ScalarField<T>,
    pub goal: Option<GoalFunctional<T>>,
    pub reference: Option<ReferenceRule<T>>,
    pub exact_solution: Option<ScalarField<T>>,
}

impl<T: fmt::Debug> fmt::Debug for ProblemDefinition<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemDefinition")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("geometry", &self.geometry)
            .field("form", &self.form)
            .field("dirichlet_tags", &self.dirichlet_tags)
            .field("goal", &self.goal)
            .field("reference", &self.reference)
            .finish_non_exhaustive()
    }
}

impl<T: Real> ProblemDefinition<T> {
    pub fn base_mesh(&self) -> Mesh<T> {
        match self.geometry {
            Geometry::UnitSquare { n } => {
                Mesh::create_rect_grid(n, n, [T::zero(); 2], [T::one(); 2]).expect("valid unit square grid")
            }
            Geometry::LShape => Mesh::create_lshape(),
        }
    }

    pub fn initial_mesh(&self) -> Mesh<T> {
        (0..self.initial_refinements).fold(self.base_mesh(), |m, _| m.refine_uniform())
    }

    /// Boundary tags with natural (Neumann) conditions.
    pub fn is_dirichlet(&self, tag: Option<BoundaryTag>) -> bool {
        tag.is_some_and(|t| self.dirichlet_tags.contains(&t))
    }

    /// Reference value of the goal as resolved on `mesh`; `None` when the
    /// reference has to be computed numerically.
    pub fn reference_value(&self, mesh: &Mesh<T>) -> Result<Option<T>> {
        match self.reference {
            Some(ReferenceRule::Exact(v)) => Ok(Some(v)),
            Some(ReferenceRule::DiscMean { point_value, laplacian }) => {
                let goal = self.goal.as_ref().ok_or_else(|| Error::Usage("disc mean without a goal".into()))?;
                let r = goal.radius(mesh)?.ok_or_else(|| Error::Usage("disc mean needs a point goal".into()))?;
                Ok(Some(point_value + r * r / T::lit(8.0) * laplacian))
            }
            Some(ReferenceRule::FineMesh { .. }) | None => Ok(None),
        }
    }
}

fn constant<T: Real>(c: f64) -> ScalarField<T> {
    let c = T::lit(c);
    Arc::new(move |_| c)
}

/// `(value, tail estimate)` of the series solution of `−Δu = 1` on the unit
/// square with zero boundary values; odd modes up to `order`. The tail
/// estimate is the first omitted term of every alternating row.
pub fn poisson_series<T: Real>(x: Point<T>, order: usize) -> (T, T) {
    let pi = T::PI();
    let c = T::lit(16.0) / pi.powi(4);
    let term = |m: usize, n: usize| {
        let (m, n) = (T::from_count(m), T::from_count(n));
        c / (m * n * (m * m + n * n))
    };
    let mut sum = T::zero();
    for m in (1..=order).step_by(2) {
        let sx = (T::from_count(m) * pi * x[0]).sin();
        for n in (1..=order).step_by(2) {
            sum += term(m, n) * sx * (T::from_count(n) * pi * x[1]).sin();
        }
    }
    let tail: T = (1..=order).step_by(2).map(|n| T::two() * term(order + 2, n)).sum();
    (sum, tail)
}

/// Outflow integral `∫ u(1, y) dy` of the advection-diffusion benchmark.
pub fn advection_outflow_flux<T: Real>(nu: T) -> T {
    let pi = T::PI();
    let disc = (T::one() + T::lit(4.0) * nu * nu * pi * pi).sqrt();
    let l1 = (T::one() + disc) / (T::two() * nu);
    let l2 = (T::one() - disc) / (T::two() * nu);
    // u = sin(πy)(A e^{l1 x} + B e^{l2 x}), A + B = 1, u_x(1, y) = 0;
    // with a = A e^{l1} the outflow trace is a + B e^{l2}
    let e2 = l2.exp();
    let b = T::one() / (T::one() - l2 * e2 / (l1 * l1.exp()));
    let a = -b * l2 * e2 / l1;
    T::two() / pi * (a + b * e2)
}

pub fn registry<T: Real>() -> Vec<ProblemDefinition<T>> {
    let pi = T::PI();
    let all_sides = vec![BOTTOM, RIGHT, TOP, LEFT];
    let laplace = FormDescriptor::new(vec![FormTerm::Stiffness(T::one())]);

    let p1 = ProblemDefinition {
        name: "P1",
        description: "Poisson -Δu = 1 on the unit square, regularized point value at (0.5, 0.5)",
        kind: ProblemKind::Stationary,
        geometry: Geometry::UnitSquare { n: 2 },
        initial_refinements: 1,
        form: laplace.clone(),
        source: constant(1.0),
        dirichlet_tags: all_sides.clone(),
        dirichlet_value: constant(0.0),
        goal: Some(GoalFunctional::point_value([T::half(), T::half()])),
        reference: Some(ReferenceRule::DiscMean {
            point_value: poisson_series([T::half(), T::half()], SERIES_ORDER).0,
            laplacian: -T::one(),
        }),
        exact_solution: None,
    };

    let p1l = ProblemDefinition {
        name: "P1L",
        description: "Poisson -Δu = 1 on the L-shape, regularized point value at (-0.5, 0.5)",
        geometry: Geometry::LShape,
        initial_refinements: 2,
        dirichlet_tags: vec![LSHAPE_BOUNDARY],
        goal: Some(GoalFunctional::point_value([-T::half(), T::half()])),
        reference: Some(ReferenceRule::DiscMean { point_value: T::lit(P1L_POINT_VALUE), laplacian: -T::one() }),
        ..p1.clone()
    };

    let nu = T::lit(0.01);
    let p2 = ProblemDefinition {
        name: "P2",
        description: "advection-diffusion -0.01Δu + ∂u/∂x = 0, inflow profile sin(πy), outflow flux",
        kind: ProblemKind::Stationary,
        geometry: Geometry::UnitSquare { n: 4 },
        initial_refinements: 1,
        form: FormDescriptor::new(vec![
            FormTerm::Stiffness(nu),
            FormTerm::Advection(Arc::new(|_| [T::one(), T::zero()])),
        ]),
        source: constant(0.0),
        dirichlet_tags: vec![LEFT, BOTTOM, TOP],
        dirichlet_value: Arc::new(move |x: Point<T>| if x[0] <= T::lit(1e-12) { (pi * x[1]).sin() } else { T::zero() }),
        goal: Some(GoalFunctional::boundary_flux(RIGHT)),
        reference: Some(ReferenceRule::Exact(advection_outflow_flux(nu))),
        exact_solution: None,
    };

    let exact3: ScalarField<T> = Arc::new(move |x: Point<T>| (pi * x[0]).sin() * (pi * x[1]).sin());
    let e3 = exact3.clone();
    let p3 = ProblemDefinition {
        name: "P3",
        description: "semilinear -Δu + u³ = f with u = sin(πx)sin(πy), mean over [0,0.5]²",
        kind: ProblemKind::Stationary,
        geometry: Geometry::UnitSquare { n: 2 },
        initial_refinements: 1,
        form: FormDescriptor::new(vec![FormTerm::Stiffness(T::one()), FormTerm::SemilinearCubic(T::one())]),
        source: Arc::new(move |x| {
            let u = e3(x);
            T::two() * pi * pi * u + u * u * u
        }),
        dirichlet_tags: all_sides.clone(),
        dirichlet_value: constant(0.0),
        goal: Some(GoalFunctional::subdomain_mean([T::zero(); 2], [T::half(); 2])),
        reference: Some(ReferenceRule::Exact(T::lit(4.0) / (pi * pi))),
        exact_solution: Some(exact3),
    };

    let p4 = ProblemDefinition {
        name: "P4",
        description: "Dirichlet Laplace eigenvalue on the unit square, target 2π²",
        kind: ProblemKind::Eigen { mass: FormDescriptor::mass(), shift: T::lit(15.0) },
        geometry: Geometry::UnitSquare { n: 4 },
        initial_refinements: 1,
        form: laplace.clone(),
        source: constant(0.0),
        dirichlet_tags: all_sides.clone(),
        dirichlet_value: constant(0.0),
        goal: None,
        reference: Some(ReferenceRule::Exact(T::two() * pi * pi)),
        exact_solution: Some(Arc::new(move |x: Point<T>| T::two() * (pi * x[0]).sin() * (pi * x[1]).sin())),
    };

    let nu4 = T::lit(0.1);
    let p4n = ProblemDefinition {
        name: "P4n",
        description: "advection-diffusion eigenvalue -0.1Δu + ∂u/∂x = λu, target 2π²ν + 1/(4ν)",
        kind: ProblemKind::Eigen { mass: FormDescriptor::mass(), shift: T::lit(4.0) },
        form: FormDescriptor::new(vec![
            FormTerm::Stiffness(nu4),
            FormTerm::Advection(Arc::new(|_| [T::one(), T::zero()])),
        ]),
        reference: Some(ReferenceRule::Exact(T::two() * pi * pi * nu4 + T::one() / (T::lit(4.0) * nu4))),
        exact_solution: None,
        ..p4.clone()
    };

    let p5 = ProblemDefinition {
        name: "P5",
        description: "Neumann boundary control of -Δu + u = 0 on the left edge, tracking on the right half",
        kind: ProblemKind::Control,
        geometry: Geometry::UnitSquare { n: 2 },
        initial_refinements: 2,
        form: FormDescriptor::new(vec![FormTerm::Stiffness(T::one()), FormTerm::Mass(T::one())]),
        source: constant(0.0),
        dirichlet_tags: Vec::new(),
        dirichlet_value: constant(0.0),
        goal: None,
        reference: Some(ReferenceRule::FineMesh { refinements: 2 }),
        exact_solution: None,
    };

    vec![p1, p1l, p2, p3, p4, p4n, p5]
}

pub fn find<T: Real>(name: &str) -> Option<ProblemDefinition<T>> {
    registry().into_iter().find(|p| p.name.eq_ignore_ascii_case(name))
}

pub fn problem_names() -> Vec<&'static str> {
    registry::<f64>().iter().map(|p| p.name).collect()
}
