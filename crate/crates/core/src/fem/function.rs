use std::sync::Arc;

use super::element::{node_position, reference_basis};
use super::space::FeSpace;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::{Point, Real};

/// Value, gradient and Laplacian of a field at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Sample<T> {
    pub value: T,
    pub grad: [T; 2],
    pub laplacian: T,
}

impl<T: Real> Sample<T> {
    pub fn zero() -> Self {
        Self { value: T::zero(), grad: [T::zero(); 2], laplacian: T::zero() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            value: self.value - other.value,
            grad: [self.grad[0] - other.grad[0], self.grad[1] - other.grad[1]],
            laplacian: self.laplacian - other.laplacian,
        }
    }
}

/// Shape functions of one cell pulled back to physical coordinates at a point.
///
/// Second derivatives use the Jacobian at the point only, which is exact on
/// parallelogram cells (every mesh built by this crate).
#[derive(Debug, Clone)]
pub struct PhysicalBasis<T> {
    pub x: Point<T>,
    pub det: T,
    pub values: Vec<T>,
    pub grads: Vec<[T; 2]>,
    pub laplacians: Vec<T>,
}

pub fn physical_basis<T: Real>(mesh: &Mesh<T>, cell: usize, degree: usize, xi: Point<T>) -> PhysicalBasis<T> {
    let j = mesh.jacobian(cell, xi);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    // g = J⁻¹
    let g = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let rb = reference_basis(degree, xi);
    let grads = rb
        .grads
        .iter()
        .map(|gr| [g[0][0] * gr[0] + g[1][0] * gr[1], g[0][1] * gr[0] + g[1][1] * gr[1]])
        .collect();
    let laplacians = rb
        .hessians
        .iter()
        .map(|h| {
            let mut lap = T::zero();
            for k in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        lap += g[a][k] * h[a][b] * g[b][k];
                    }
                }
            }
            lap
        })
        .collect();
    PhysicalBasis { x: mesh.map_to_physical(cell, xi), det, values: rb.values, grads, laplacians }
}

/// Coefficient vector bound to a finite element space.
#[derive(Debug, Clone)]
pub struct FeFunction<T> {
    space: Arc<FeSpace<T>>,
    coefficients: Vec<T>,
}

impl<T: Real> FeFunction<T> {
    pub fn zero(space: Arc<FeSpace<T>>) -> Self {
        let n = space.dof_count();
        Self { space, coefficients: vec![T::zero(); n] }
    }

    /// Wraps coefficients and re-imposes the hanging-node constraints.
    pub fn from_coefficients(space: Arc<FeSpace<T>>, mut coefficients: Vec<T>) -> Self {
        assert_eq!(coefficients.len(), space.dof_count(), "coefficient vector has wrong length");
        space.distribute(&mut coefficients);
        Self { space, coefficients }
    }

    pub fn space(&self) -> &Arc<FeSpace<T>> {
        &self.space
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        self.space.mesh()
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> Vec<T> {
        self.coefficients
    }

    /// Local coefficients of an active cell in local node order.
    pub fn cell_coefficients(&self, cell: usize) -> Vec<T> {
        self.space.cell_dofs(cell).iter().map(|&d| self.coefficients[d]).collect()
    }

    pub fn sample_with(&self, cell: usize, basis: &PhysicalBasis<T>) -> Sample<T> {
        let mut s = Sample::zero();
        for (i, &d) in self.space.cell_dofs(cell).iter().enumerate() {
            let c = self.coefficients[d];
            s.value += c * basis.values[i];
            s.grad[0] += c * basis.grads[i][0];
            s.grad[1] += c * basis.grads[i][1];
            s.laplacian += c * basis.laplacians[i];
        }
        s
    }

    /// Value, gradient and Laplacian at reference point `xi` of `cell`.
    pub fn sample(&self, cell: usize, xi: Point<T>) -> Sample<T> {
        let basis = physical_basis(self.mesh(), cell, self.space.degree(), xi);
        self.sample_with(cell, &basis)
    }

    pub fn value_at(&self, cell: usize, xi: Point<T>) -> T {
        let rb = reference_basis(self.space.degree(), xi);
        self.space.cell_dofs(cell).iter().zip(&rb.values).map(|(&d, &v)| self.coefficients[d] * v).sum()
    }

    /// Point evaluation anywhere in the closure of the domain.
    pub fn evaluate(&self, x: Point<T>) -> Result<T> {
        let (cell, xi) = self.mesh().locate(x)?;
        Ok(self.value_at(cell, xi))
    }

    /// Nodal interpolant: coefficients are `f` at the support points, then
    /// constraints are re-imposed.
    pub fn nodal_interpolate(space: Arc<FeSpace<T>>, f: impl Fn(Point<T>) -> T) -> Self {
        let coefficients = space.support_points().iter().map(|&p| f(p)).collect();
        Self::from_coefficients(space, coefficients)
    }

    /// Nodal interpolant of this function into `target`.
    ///
    /// On a shared mesh the values come from the common cell; otherwise every
    /// support point of `target` is located in this function's mesh.
    pub fn interpolate_into(&self, target: &Arc<FeSpace<T>>) -> Result<Self> {
        let mut coefficients = vec![T::zero(); target.dof_count()];
        if Arc::ptr_eq(self.mesh(), target.mesh()) {
            for &c in target.mesh().active_cells() {
                for (i, &d) in target.cell_dofs(c).iter().enumerate() {
                    if !target.is_constrained(d) {
                        coefficients[d] = self.value_at(c, node_position(target.degree(), i));
                    }
                }
            }
        } else {
            for (d, coeff) in coefficients.iter_mut().enumerate() {
                if !target.is_constrained(d) {
                    *coeff = self.evaluate(target.support_point(d))?;
                }
            }
        }
        Ok(Self::from_coefficients(target.clone(), coefficients))
    }

    /// `self − other` on the same space.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if !Arc::ptr_eq(&self.space, &other.space) {
            return Err(Error::Usage("functions live on different spaces".into()));
        }
        let c = self.coefficients.iter().zip(&other.coefficients).map(|(&a, &b)| a - b).collect();
        Ok(Self { space: self.space.clone(), coefficients: c })
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self { space: self.space.clone(), coefficients: self.coefficients.iter().map(|&c| alpha * c).collect() }
    }
}
