use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::element::{n_local, node_position};
use crate::mesh::{BoundaryTag, Mesh};
use crate::{Point, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum DofKey {
    Vertex(usize),
    Edge(usize, usize),
    Interior(usize),
}

fn edge_key(a: usize, b: usize) -> DofKey {
    DofKey::Edge(a.min(b), a.max(b))
}

/// Continuous Lagrange space of degree 1 or 2 on the active cells of a mesh.
///
/// Dofs on the fine side of a hanging edge are kept in the numbering and
/// constrained to the coarse edge trace.
#[derive(Debug)]
pub struct FeSpace<T> {
    mesh: Arc<Mesh<T>>,
    degree: usize,
    dof_count: usize,
    cell_dofs: Vec<Vec<usize>>,
    constraints: BTreeMap<usize, Vec<(usize, T)>>,
    support_points: Vec<Point<T>>,
    boundary_dofs: BTreeMap<usize, BTreeSet<BoundaryTag>>,
    vertex_dofs: Vec<Option<usize>>,
}

impl<T: Real> FeSpace<T> {
    pub fn build(mesh: Arc<Mesh<T>>, degree: usize) -> Arc<Self> {
        assert!(degree == 1 || degree == 2, "only Q1 and Q2 are supported");
        let mut index: BTreeMap<DofKey, usize> = BTreeMap::new();
        let mut support_points = Vec::new();
        let mut cell_dofs = vec![Vec::new(); mesh.cells().len()];
        for &c in mesh.active_cells() {
            let keys = Self::local_keys(&mesh, c, degree);
            let mut dofs = Vec::with_capacity(keys.len());
            for (i, k) in keys.into_iter().enumerate() {
                let next = index.len();
                let id = *index.entry(k).or_insert(next);
                if id == next {
                    support_points.push(mesh.map_to_physical(c, node_position(degree, i)));
                }
                dofs.push(id);
            }
            cell_dofs[c] = dofs;
        }
        let mut vertex_dofs = vec![None; mesh.vertices().len()];
        for (k, &id) in &index {
            if let DofKey::Vertex(v) = *k {
                vertex_dofs[v] = Some(id);
            }
        }

        let mut constraints = BTreeMap::new();
        let (three_eighths, three_quarters, minus_eighth) = (T::lit(0.375), T::lit(0.75), T::lit(-0.125));
        for edge in mesh.edges() {
            let Some(m) = edge.hanging else { continue };
            let [a, b] = edge.vertices;
            let (da, db) = (index[&DofKey::Vertex(a)], index[&DofKey::Vertex(b)]);
            let dm = index[&DofKey::Vertex(m)];
            if degree == 1 {
                constraints.insert(dm, vec![(da, T::half()), (db, T::half())]);
            } else {
                let dab = index[&edge_key(a, b)];
                constraints.insert(dm, vec![(dab, T::one())]);
                let near_a = index[&edge_key(a, m)];
                let near_b = index[&edge_key(m, b)];
                constraints.insert(near_a, vec![(da, three_eighths), (dab, three_quarters), (db, minus_eighth)]);
                constraints.insert(near_b, vec![(da, minus_eighth), (dab, three_quarters), (db, three_eighths)]);
            }
        }
        debug_assert!(
            constraints.values().flatten().all(|(master, _)| !constraints.contains_key(master)),
            "constraint chains violate one-irregularity"
        );

        let mut boundary_dofs: BTreeMap<usize, BTreeSet<BoundaryTag>> = BTreeMap::new();
        for &c in mesh.active_cells() {
            let cell = mesh.cell(c);
            for e in 0..4 {
                let Some(tag) = cell.boundary[e] else { continue };
                let [a, b] = cell.edge(e);
                let mut keys = vec![DofKey::Vertex(a), DofKey::Vertex(b)];
                if degree == 2 {
                    keys.push(edge_key(a, b));
                }
                for k in keys {
                    boundary_dofs.entry(index[&k]).or_default().insert(tag);
                }
            }
        }

        Arc::new(Self {
            dof_count: index.len(),
            mesh,
            degree,
            cell_dofs,
            constraints,
            support_points,
            boundary_dofs,
            vertex_dofs,
        })
    }

    fn local_keys(mesh: &Mesh<T>, c: usize, degree: usize) -> Vec<DofKey> {
        let cell = mesh.cell(c);
        let mut keys: Vec<DofKey> = cell.vertices.iter().map(|&v| DofKey::Vertex(v)).collect();
        if degree == 2 {
            for e in 0..4 {
                let [a, b] = cell.edge(e);
                keys.push(edge_key(a, b));
            }
            keys.push(DofKey::Interior(c));
        }
        debug_assert_eq!(keys.len(), n_local(degree));
        keys
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dof_count(&self) -> usize {
        self.dof_count
    }

    /// Global dofs of an active cell in local node order.
    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[cell]
    }

    pub fn constraints(&self) -> &BTreeMap<usize, Vec<(usize, T)>> {
        &self.constraints
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constraints.contains_key(&dof)
    }

    pub fn support_point(&self, dof: usize) -> Point<T> {
        self.support_points[dof]
    }

    pub fn support_points(&self) -> &[Point<T>] {
        &self.support_points
    }

    /// Dofs on boundary edges, with the tags of those edges.
    pub fn boundary_dofs(&self) -> &BTreeMap<usize, BTreeSet<BoundaryTag>> {
        &self.boundary_dofs
    }

    /// Dofs on any edge carrying one of `tags`.
    pub fn dofs_with_tags(&self, tags: &[BoundaryTag]) -> Vec<usize> {
        self.boundary_dofs
            .iter()
            .filter(|(_, t)| tags.iter().any(|tag| t.contains(tag)))
            .map(|(&d, _)| d)
            .collect()
    }

    pub fn vertex_dof(&self, vertex: usize) -> Option<usize> {
        self.vertex_dofs[vertex]
    }

    /// Expands a dof into `(unconstrained dof, weight)` pairs.
    pub fn resolve(&self, dof: usize) -> Vec<(usize, T)> {
        match self.constraints.get(&dof) {
            Some(masters) => masters.clone(),
            None => vec![(dof, T::one())],
        }
    }

    /// Overwrites constrained entries with their constraint combination.
    pub fn distribute(&self, coefficients: &mut [T]) {
        for (&dof, masters) in &self.constraints {
            coefficients[dof] = masters.iter().map(|&(m, w)| w * coefficients[m]).sum();
        }
    }

    /// Transposed constraint map for vectors: moves constrained entries onto
    /// their masters and zeroes them.
    pub fn condense_vector(&self, v: &mut [T]) {
        for (&dof, masters) in &self.constraints {
            let val = v[dof];
            for &(m, w) in masters {
                v[m] += w * val;
            }
            v[dof] = T::zero();
        }
    }

    /// Largest violation `|value − Σ cⱼ·masterⱼ|` over constrained dofs.
    pub fn constraint_violation(&self, coefficients: &[T]) -> T {
        self.constraints
            .iter()
            .map(|(&d, masters)| (coefficients[d] - masters.iter().map(|&(m, w)| w * coefficients[m]).sum::<T>()).abs())
            .fold(T::zero(), T::max)
    }
}
