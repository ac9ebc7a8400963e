use std::fmt;

use crate::error::{Error, Result};
use crate::fem::assembly::{segment_quadrature, ScalarField, QUAD_POINTS};
use crate::fem::quadrature::{gauss_1d, gauss_square};
use crate::fem::FeFunction;
use crate::mesh::{BoundaryTag, Mesh};
use crate::{Point, Real};

const DISC_PANELS: usize = 16;
const DISC_ANGLES: usize = 128;

/// Radius of the disc that regularizes a point value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusRule<T> {
    /// Diameter of the active cell containing the point.
    CellDiameter,
    Fixed(T),
}

#[derive(Clone)]
pub enum GoalKind<T> {
    /// Mean over a disc around `x0`; a unit-mass mollified point value.
    PointValue { x0: Point<T>, radius: RadiusRule<T> },
    /// Mean over an axis-aligned rectangle.
    SubdomainMean { lower: Point<T>, upper: Point<T> },
    /// `∫_Γ u ds` over the boundary part with the given tag.
    BoundaryFlux { tag: BoundaryTag },
    /// `(f, u)`.
    RhsFunctional { f: ScalarField<T> },
}

impl<T: fmt::Debug> fmt::Debug for GoalKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalKind::PointValue { x0, radius } => write!(f, "PointValue {{ x0: {x0:?}, radius: {radius:?} }}"),
            GoalKind::SubdomainMean { lower, upper } => write!(f, "SubdomainMean {{ {lower:?} .. {upper:?} }}"),
            GoalKind::BoundaryFlux { tag } => write!(f, "BoundaryFlux {{ tag: {tag} }}"),
            GoalKind::RhsFunctional { .. } => write!(f, "RhsFunctional"),
        }
    }
}

/// One quadrature sample of a linear goal: `J(u) = Σ weight · u(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalSample<T> {
    pub cell: usize,
    pub xi: Point<T>,
    pub x: Point<T>,
    pub weight: T,
}

/// A linear output functional. Its derivative is the functional itself.
#[derive(Debug, Clone)]
pub struct GoalFunctional<T> {
    pub kind: GoalKind<T>,
}

impl<T: Real> GoalFunctional<T> {
    pub fn point_value(x0: Point<T>) -> Self {
        Self { kind: GoalKind::PointValue { x0, radius: RadiusRule::CellDiameter } }
    }

    pub fn subdomain_mean(lower: Point<T>, upper: Point<T>) -> Self {
        Self { kind: GoalKind::SubdomainMean { lower, upper } }
    }

    pub fn boundary_flux(tag: BoundaryTag) -> Self {
        Self { kind: GoalKind::BoundaryFlux { tag } }
    }

    pub fn rhs_functional(f: ScalarField<T>) -> Self {
        Self { kind: GoalKind::RhsFunctional { f } }
    }

    /// Disc radius on `mesh` for a point-value goal.
    pub fn radius(&self, mesh: &Mesh<T>) -> Result<Option<T>> {
        match &self.kind {
            GoalKind::PointValue { x0, radius } => Ok(Some(disc_radius(mesh, *x0, *radius)?)),
            _ => Ok(None),
        }
    }

    /// Fixes mesh-dependent parameters, so the result is the same functional
    /// on every mesh.
    pub fn resolve(&self, mesh: &Mesh<T>) -> Result<Self> {
        match &self.kind {
            GoalKind::PointValue { x0, radius } => {
                let r = disc_radius(mesh, *x0, *radius)?;
                Ok(Self { kind: GoalKind::PointValue { x0: *x0, radius: RadiusRule::Fixed(r) } })
            }
            _ => Ok(self.clone()),
        }
    }

    pub fn samples(&self, mesh: &Mesh<T>) -> Result<Vec<GoalSample<T>>> {
        match &self.kind {
            GoalKind::PointValue { x0, radius } => disc_samples(mesh, *x0, disc_radius(mesh, *x0, *radius)?),
            GoalKind::SubdomainMean { lower, upper } => rectangle_samples(mesh, *lower, *upper),
            GoalKind::BoundaryFlux { tag } => Ok(boundary_samples(mesh, *tag)),
            GoalKind::RhsFunctional { f } => Ok(volume_samples(mesh, |x| f(x))),
        }
    }

    pub fn evaluate(&self, u: &FeFunction<T>) -> Result<T> {
        Ok(self.samples(u.mesh())?.iter().map(|s| s.weight * u.value_at(s.cell, s.xi)).sum())
    }

    /// The same quadrature applied to a function given in closed form.
    pub fn evaluate_exact(&self, mesh: &Mesh<T>, f: impl Fn(Point<T>) -> T) -> Result<T> {
        Ok(self.samples(mesh)?.iter().map(|s| s.weight * f(s.x)).sum())
    }
}

/// Point value regularized by a disc of one local cell diameter, shrunk by
/// halving until the disc fits into the domain.
pub fn regularize_point_value<T: Real>(x0: Point<T>, mesh: &Mesh<T>) -> Result<GoalFunctional<T>> {
    GoalFunctional::point_value(x0).resolve(mesh)
}

fn disc_radius<T: Real>(mesh: &Mesh<T>, x0: Point<T>, rule: RadiusRule<T>) -> Result<T> {
    let (cell, _) = mesh.locate(x0)?;
    let mut r = match rule {
        RadiusRule::Fixed(r) => return Ok(r),
        RadiusRule::CellDiameter => mesh.cell_diameter(cell),
    };
    for _ in 0..60 {
        let fits = (0..DISC_ANGLES).all(|k| {
            let t = T::TAU() * T::from_count(k) / T::from_count(DISC_ANGLES);
            mesh.locate([x0[0] + r * t.cos(), x0[1] + r * t.sin()]).is_ok()
        });
        if fits {
            return Ok(r);
        }
        r *= T::half();
    }
    Err(Error::Domain("point lies on the domain boundary".into()))
}

fn disc_samples<T: Real>(mesh: &Mesh<T>, x0: Point<T>, r: T) -> Result<Vec<GoalSample<T>>> {
    let radial = gauss_1d::<T>(QUAD_POINTS);
    let area = T::PI() * r * r;
    let dtheta = T::TAU() / T::from_count(DISC_ANGLES);
    let panel = r / T::from_count(DISC_PANELS);
    let mut out = Vec::with_capacity(DISC_PANELS * QUAD_POINTS * DISC_ANGLES);
    for p in 0..DISC_PANELS {
        for &(s, w) in &radial {
            let rho = (T::from_count(p) + s) * panel;
            for k in 0..DISC_ANGLES {
                let t = (T::from_count(k) + T::half()) * dtheta;
                let x = [x0[0] + rho * t.cos(), x0[1] + rho * t.sin()];
                let (cell, xi) = mesh.locate(x)?;
                out.push(GoalSample { cell, xi, x, weight: w * panel * rho * dtheta / area });
            }
        }
    }
    // unit mass up to rounding
    let total: T = out.iter().map(|s| s.weight).sum();
    for s in &mut out {
        s.weight /= total;
    }
    Ok(out)
}

/// Samples of the mean over `[lower, upper]`; assumes axis-aligned
/// rectangular cells, which is what every mesh here consists of.
fn rectangle_samples<T: Real>(mesh: &Mesh<T>, lower: Point<T>, upper: Point<T>) -> Result<Vec<GoalSample<T>>> {
    if !(lower[0] < upper[0] && lower[1] < upper[1]) {
        return Err(Error::Domain("empty averaging region".into()));
    }
    let area = (upper[0] - lower[0]) * (upper[1] - lower[1]);
    let rule = gauss_square::<T>(QUAD_POINTS);
    let mut out = Vec::new();
    for &c in mesh.active_cells() {
        let p = mesh.cell_coords(c);
        let lo = [p[0][0].max(lower[0]), p[0][1].max(lower[1])];
        let hi = [p[2][0].min(upper[0]), p[2][1].min(upper[1])];
        if lo[0] >= hi[0] || lo[1] >= hi[1] {
            continue;
        }
        let sub = (hi[0] - lo[0]) * (hi[1] - lo[1]);
        for &(s, w) in &rule {
            let x = [lo[0] + s[0] * (hi[0] - lo[0]), lo[1] + s[1] * (hi[1] - lo[1])];
            out.push(GoalSample { cell: c, xi: mesh.map_to_reference(c, x), x, weight: w * sub / area });
        }
    }
    Ok(out)
}

fn boundary_samples<T: Real>(mesh: &Mesh<T>, tag: BoundaryTag) -> Vec<GoalSample<T>> {
    let mut out = Vec::new();
    for face in mesh.faces().iter().filter(|f| f.tag == Some(tag)) {
        let c = face.inner.cell;
        for (x, ds) in segment_quadrature(mesh.vertex(face.vertices[0]), mesh.vertex(face.vertices[1])) {
            out.push(GoalSample { cell: c, xi: mesh.map_to_reference(c, x), x, weight: ds });
        }
    }
    out
}

fn volume_samples<T: Real>(mesh: &Mesh<T>, f: impl Fn(Point<T>) -> T) -> Vec<GoalSample<T>> {
    let rule = gauss_square::<T>(QUAD_POINTS);
    let mut out = Vec::new();
    for &c in mesh.active_cells() {
        for &(xi, w) in &rule {
            let x = mesh.map_to_physical(c, xi);
            let j = mesh.jacobian(c, xi);
            let det = (j[0][0] * j[1][1] - j[0][1] * j[1][0]).abs();
            out.push(GoalSample { cell: c, xi, x, weight: f(x) * w * det });
        }
    }
    out
}
