use std::collections::BTreeSet;

use dwr_core::mesh::Mesh;
use proptest::prelude::*;

fn unit_grid(n: usize) -> Mesh<f64> {
    Mesh::create_rect_grid(n, n, [0.0, 0.0], [1.0, 1.0]).unwrap()
}

/// Largest number of active-cell vertices lying strictly inside an edge of an
/// active cell, by geometric brute force.
fn max_vertices_inside_edges(mesh: &Mesh<f64>) -> usize {
    let used: BTreeSet<usize> =
        mesh.active_cells().iter().flat_map(|&c| mesh.cell(c).vertices.iter().copied()).collect();
    let mut worst = 0;
    for &c in mesh.active_cells() {
        for e in 0..4 {
            let [a, b] = mesh.cell(c).edge(e);
            let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
            let len2 = (pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2);
            let inside = used
                .iter()
                .filter(|&&v| v != a && v != b)
                .filter(|&&v| {
                    let p = mesh.vertex(v);
                    let cross = (pb[0] - pa[0]) * (p[1] - pa[1]) - (pb[1] - pa[1]) * (p[0] - pa[0]);
                    let t = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / len2;
                    cross.abs() < 1e-12 && t > 1e-12 && t < 1.0 - 1e-12
                })
                .count();
            worst = worst.max(inside);
        }
    }
    worst
}

#[test]
fn repeated_marking_forces_neighbor_refinement() {
    let once = unit_grid(2).refine_with_closure(&BTreeSet::from([0])).unwrap();
    let corner = *once
        .active_cells()
        .iter()
        .find(|&&c| {
            let v = once.cell_coords(c);
            once.cell(c).level == 1 && v.iter().any(|p| p[0] == 0.5 && p[1] == 0.5)
        })
        .unwrap();
    let twice = once.refine_with_closure(&BTreeSet::from([corner])).unwrap();
    assert!(max_vertices_inside_edges(&twice) <= 1);
    // the level-0 neighbors touching the refined corner had to be split
    assert!(twice.n_active() > once.n_active() + 3);
    let level0 = twice.active_cells().iter().filter(|&&c| twice.cell(c).level == 0).count();
    assert!(level0 < 3);
}

#[test]
fn lshape_refines_consistently() {
    let m = Mesh::<f64>::create_lshape().refine_uniform().refine_uniform();
    assert_eq!(m.n_active(), 48);
    let total: f64 = m.active_cells().iter().map(|&c| m.cell_area(c)).sum();
    assert!((total - 3.0).abs() < 1e-12 * 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closure_keeps_invariants(seed in proptest::collection::vec(any::<u64>(), 1..5), n in 1usize..4) {
        let mut mesh = unit_grid(n);
        for s in seed {
            let active = mesh.active_cells().to_vec();
            let marked: BTreeSet<usize> =
                active.iter().enumerate().filter(|(i, _)| (s >> (i % 64)) & 1 == 1).map(|(_, &c)| c).collect();
            let marked = if marked.is_empty() { BTreeSet::from([active[(s as usize) % active.len()]]) } else { marked };
            let next = mesh.refine_with_closure(&marked).unwrap();
            prop_assert!(next.n_active() > mesh.n_active());
            let total: f64 = next.active_cells().iter().map(|&c| next.cell_area(c)).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(max_vertices_inside_edges(&next) <= 1);
            for (id, cell) in next.cells().iter().enumerate() {
                if let Some(children) = cell.children {
                    for child in children {
                        prop_assert!((next.cell_area(child) - next.cell_area(id) / 4.0).abs() <= 1e-15);
                    }
                }
            }
            for &c in next.active_cells() {
                if let Some(patch) = next.sibling_patch(c) {
                    prop_assert!(patch.iter().all(|&p| next.cell(p).is_active()));
                    prop_assert_eq!(next.cell(c).parent, next.cell(patch[0]).parent);
                }
            }
            mesh = next;
        }
    }
}
