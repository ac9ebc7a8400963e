use std::sync::Arc;

use super::element::{node_position, reference_basis};
use super::function::FeFunction;
use super::space::FeSpace;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::{Point, Real};

/// Offset of child `i` inside the parent reference square.
const CHILD_OFFSET: [(f64, f64); 4] = [(0.0, 0.0), (0.5, 0.0), (0.5, 0.5), (0.0, 0.5)];

/// Vertex ids of the nine Q2 nodes of a refined parent, in Q2 node order.
pub fn parent_nodes<T: Real>(mesh: &Mesh<T>, parent: usize) -> [usize; 9] {
    let p = mesh.cell(parent);
    let children = p.children.expect("parent is refined");
    let mut nodes = [0; 9];
    for e in 0..4 {
        nodes[e] = p.vertices[e];
        nodes[4 + e] = mesh.midpoint(p.vertices[e], p.vertices[(e + 1) % 4]).expect("refined edge has a midpoint");
    }
    nodes[8] = mesh.cell(children[0]).vertices[2];
    nodes
}

/// Position of a child reference point in its parent's reference square.
pub fn child_to_parent<T: Real>(child_index: usize, xi: Point<T>) -> Point<T> {
    let (ox, oy) = CHILD_OFFSET[child_index];
    [T::lit(ox) + xi[0] * T::half(), T::lit(oy) + xi[1] * T::half()]
}

/// Higher-order reconstruction of a Q1 function.
///
/// On every cell with a parent, the nine Q1 values at the parent's vertices,
/// edge midpoints and center define a biquadratic, which is read into a Q2
/// space on the same mesh. Cells at level 0 keep the bilinear values, so the
/// recovered weight vanishes there.
pub fn patch_recover<T: Real>(fh: &FeFunction<T>) -> Result<FeFunction<T>> {
    let space = fh.space();
    if space.degree() != 1 {
        return Err(Error::Usage("patch recovery expects a Q1 function".into()));
    }
    let mesh = space.mesh();
    let target = FeSpace::build(mesh.clone(), 2);
    let vertex_value = |v: usize| fh.coefficients()[space.vertex_dof(v).expect("parent nodes are mesh vertices")];
    let mut coefficients = vec![T::zero(); target.dof_count()];
    let mut assigned = vec![false; target.dof_count()];
    for &c in mesh.active_cells() {
        let cell = mesh.cell(c);
        let patch = cell.parent.map(|p| {
            let values = parent_nodes(mesh, p).map(vertex_value);
            let index = mesh.cell(p).children.unwrap().iter().position(|&k| k == c).unwrap();
            (values, index)
        });
        for (i, &d) in target.cell_dofs(c).iter().enumerate() {
            if assigned[d] || target.is_constrained(d) {
                continue;
            }
            let xi = node_position::<T>(2, i);
            coefficients[d] = match &patch {
                Some((values, index)) => {
                    let basis = reference_basis(2, child_to_parent(*index, xi));
                    values.iter().zip(&basis.values).map(|(&a, &b)| a * b).sum()
                }
                None => fh.value_at(c, xi),
            };
            assigned[d] = true;
        }
    }
    Ok(FeFunction::from_coefficients(Arc::clone(&target), coefficients))
}

/// Recovery weight `I*z − z` on the Q2 space of `recovered`, with the dofs on
/// the given boundary parts set to zero.
pub fn recovery_weight<T: Real>(
    fh: &FeFunction<T>,
    recovered: &FeFunction<T>,
    zero_tags: &[crate::mesh::BoundaryTag],
) -> Result<FeFunction<T>> {
    let lifted = fh.interpolate_into(recovered.space())?;
    let mut w = recovered.difference(&lifted)?.into_coefficients();
    for d in recovered.space().dofs_with_tags(zero_tags) {
        w[d] = T::zero();
    }
    Ok(FeFunction::from_coefficients(recovered.space().clone(), w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::gauss_square;
    use std::collections::BTreeSet;

    fn refined_unit(levels: usize) -> Arc<Mesh<f64>> {
        let mut m = Mesh::create_rect_grid(1, 1, [0.0, 0.0], [1.0, 1.0]).unwrap();
        for _ in 0..levels {
            m = m.refine_uniform();
        }
        Arc::new(m)
    }

    #[test]
    fn reproduces_biquadratics() {
        let space = FeSpace::build(refined_unit(2), 1);
        let f = |p: Point<f64>| 1.0 + p[0] - 2.0 * p[1] + p[0] * p[0] + 3.0 * p[0] * p[1] * p[1] - p[0] * p[0] * p[1] * p[1];
        let fh = FeFunction::nodal_interpolate(space.clone(), f);
        let r = patch_recover(&fh).unwrap();
        for &c in space.mesh().active_cells() {
            for (xi, _) in gauss_square::<f64>(3) {
                let x = space.mesh().map_to_physical(c, xi);
                assert!((r.value_at(c, xi) - f(x)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn bilinear_has_zero_weight() {
        let space = FeSpace::build(refined_unit(1), 1);
        let fh = FeFunction::nodal_interpolate(space, |p| 2.0 - p[0] + 0.5 * p[0] * p[1]);
        let r = patch_recover(&fh).unwrap();
        let w = recovery_weight(&fh, &r, &[]).unwrap();
        assert!(w.coefficients().iter().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn level_zero_cells_copy_bilinear_values() {
        let mesh = Mesh::<f64>::create_rect_grid(2, 2, [0.0, 0.0], [1.0, 1.0]).unwrap();
        let mesh = Arc::new(mesh.refine_with_closure(&BTreeSet::from([0])).unwrap());
        let space = FeSpace::build(mesh.clone(), 1);
        let fh = FeFunction::nodal_interpolate(space, |p| p[0] * p[0] + p[1] * p[1]);
        let r = patch_recover(&fh).unwrap();
        let w = recovery_weight(&fh, &r, &[]).unwrap();
        for &c in mesh.active_cells() {
            if mesh.cell(c).level == 0 {
                assert!((0..9).all(|i| w.value_at(c, node_position(2, i)).abs() < 1e-14));
            }
        }
        assert!(r.space().constraint_violation(r.coefficients()) < 1e-14);
    }

    #[test]
    fn rejects_q2_input() {
        let space = FeSpace::build(refined_unit(1), 2);
        assert!(patch_recover(&FeFunction::zero(space)).is_err());
    }
}
