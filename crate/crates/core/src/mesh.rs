//! Hierarchical quadrilateral meshes with one-irregular hanging nodes.
//!
//! Cells are refined isotropically into four children; the parents stay in
//! the mesh as ancestors so that sibling patches and point location can walk
//! the tree. Refinement returns a new mesh value.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::{Point, Real};

pub type BoundaryTag = u8;

/// Tags of a rectangular grid, in local edge order of a lower-left cell.
pub const BOTTOM: BoundaryTag = 0;
pub const RIGHT: BoundaryTag = 1;
pub const TOP: BoundaryTag = 2;
pub const LEFT: BoundaryTag = 3;
/// Single tag carried by the whole boundary of the L-shaped domain.
pub const LSHAPE_BOUNDARY: BoundaryTag = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex<T> {
    pub id: usize,
    pub coords: Point<T>,
}

/// A quadrilateral. Local edge `e` joins `vertices[e]` and `vertices[(e + 1) % 4]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: usize,
    pub vertices: [usize; 4],
    pub level: usize,
    pub parent: Option<usize>,
    pub children: Option<[usize; 4]>,
    pub boundary: [Option<BoundaryTag>; 4],
}

impl Cell {
    pub fn is_active(&self) -> bool {
        self.children.is_none()
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        [self.vertices[e], self.vertices[(e + 1) % 4]]
    }
}

/// An edge of the active mesh. A coarse edge whose neighbor is refined lists
/// the coarse cell and both fine cells, and carries the hanging vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub cells: Vec<usize>,
    pub hanging: Option<usize>,
}

/// One side of a face: the cell and its local edge index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceSide {
    pub cell: usize,
    pub local_edge: usize,
}

/// Smallest integration unit on the skeleton: a fine sub-edge with the cells
/// on either side (or a boundary tag).
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    pub inner: FaceSide,
    pub outer: Option<FaceSide>,
    pub tag: Option<BoundaryTag>,
}

#[derive(Debug, Clone)]
pub struct Mesh<T> {
    vertices: Vec<Vertex<T>>,
    cells: Vec<Cell>,
    roots: Vec<usize>,
    active: Vec<usize>,
    midpoints: BTreeMap<(usize, usize), usize>,
    split_edge_of: BTreeMap<usize, (usize, usize)>,
    edge_cells: BTreeMap<(usize, usize), Vec<usize>>,
    edges: Vec<Edge>,
    faces: Vec<Face>,
    domain_area: T,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Bilinear shape functions on the unit reference square, counterclockwise
/// from (0,0).
pub fn bilinear_shape<T: Real>(xi: Point<T>) -> [T; 4] {
    let one = T::one();
    let [s, t] = xi;
    [(one - s) * (one - t), s * (one - t), s * t, (one - s) * t]
}

fn bilinear_shape_grad<T: Real>(xi: Point<T>) -> [[T; 2]; 4] {
    let one = T::one();
    let [s, t] = xi;
    [[-(one - t), -(one - s)], [one - t, -s], [t, s], [-t, one - s]]
}

impl<T: Real> Mesh<T> {
    /// Uniform `nx × ny` grid on the box `[lower, upper]`.
    pub fn create_rect_grid(nx: usize, ny: usize, lower: Point<T>, upper: Point<T>) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Domain(format!("grid needs at least one cell per direction, got {nx}x{ny}")));
        }
        if !(lower[0] < upper[0] && lower[1] < upper[1]) || !lower.iter().chain(&upper).all(|v| v.is_finite()) {
            return Err(Error::Domain("degenerate bounds: lower must be componentwise below upper".into()));
        }
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let x = lower[0] + (upper[0] - lower[0]) * T::from_count(i) / T::from_count(nx);
                let y = lower[1] + (upper[1] - lower[1]) * T::from_count(j) / T::from_count(ny);
                vertices.push(Vertex { id: vertices.len(), coords: [x, y] });
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let boundary = [
                    (j == 0).then_some(BOTTOM),
                    (i + 1 == nx).then_some(RIGHT),
                    (j + 1 == ny).then_some(TOP),
                    (i == 0).then_some(LEFT),
                ];
                cells.push(Cell {
                    id: cells.len(),
                    vertices: [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)],
                    level: 0,
                    parent: None,
                    children: None,
                    boundary,
                });
            }
        }
        Ok(Self::from_parts(vertices, cells))
    }

    /// Three unit squares tiling `(−1,1)²` without the quadrant `[0,1]×[−1,0]`.
    pub fn create_lshape() -> Self {
        let coords = [(-1.0, -1.0), (0.0, -1.0), (-1.0, 0.0), (0.0, 0.0), (1.0, 0.0), (-1.0, 1.0), (0.0, 1.0), (1.0, 1.0)];
        let vertices = coords
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Vertex { id, coords: [T::lit(x), T::lit(y)] })
            .collect();
        let b = Some(LSHAPE_BOUNDARY);
        let cells = vec![
            Cell { id: 0, vertices: [0, 1, 3, 2], level: 0, parent: None, children: None, boundary: [b, b, None, b] },
            Cell { id: 1, vertices: [2, 3, 6, 5], level: 0, parent: None, children: None, boundary: [None, None, b, b] },
            Cell { id: 2, vertices: [3, 4, 7, 6], level: 0, parent: None, children: None, boundary: [b, b, b, None] },
        ];
        Self::from_parts(vertices, cells)
    }

    fn from_parts(vertices: Vec<Vertex<T>>, cells: Vec<Cell>) -> Self {
        let roots = (0..cells.len()).collect();
        let mut mesh = Mesh {
            vertices,
            cells,
            roots,
            active: Vec::new(),
            midpoints: BTreeMap::new(),
            split_edge_of: BTreeMap::new(),
            edge_cells: BTreeMap::new(),
            edges: Vec::new(),
            faces: Vec::new(),
            domain_area: T::zero(),
        };
        mesh.rebuild();
        mesh.domain_area = mesh.active.iter().map(|&c| mesh.cell_area(c)).sum();
        mesh
    }

    pub fn vertices(&self) -> &[Vertex<T>] {
        &self.vertices
    }

    pub fn vertex(&self, id: usize) -> Point<T> {
        self.vertices[id].coords
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: usize) -> &Cell {
        &self.cells[id]
    }

    /// Active (leaf) cell ids in ascending order.
    pub fn active_cells(&self) -> &[usize] {
        &self.active
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn domain_area(&self) -> T {
        self.domain_area
    }

    /// Midpoint vertex of the segment `(a, b)`, if it has been created.
    pub fn midpoint(&self, a: usize, b: usize) -> Option<usize> {
        self.midpoints.get(&key(a, b)).copied()
    }

    /// The coarse edge a vertex is the midpoint of, if any.
    pub fn split_edge_of(&self, v: usize) -> Option<(usize, usize)> {
        self.split_edge_of.get(&v).copied()
    }

    /// Vertices lying in the interior of a coarse active edge.
    pub fn hanging_vertices(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.edges.iter().filter_map(|e| e.hanging).collect();
        set.into_iter().collect()
    }

    /// Active cells sharing the segment `(a, b)` as a full edge.
    pub fn cells_on_edge(&self, a: usize, b: usize) -> &[usize] {
        self.edge_cells.get(&key(a, b)).map_or(&[], Vec::as_slice)
    }

    pub fn cell_coords(&self, cell: usize) -> [Point<T>; 4] {
        self.cells[cell].vertices.map(|v| self.vertices[v].coords)
    }

    pub fn cell_area(&self, cell: usize) -> T {
        let p = self.cell_coords(cell);
        let mut twice = T::zero();
        for i in 0..4 {
            let j = (i + 1) % 4;
            twice += p[i][0] * p[j][1] - p[j][0] * p[i][1];
        }
        twice * T::half()
    }

    /// Longest diagonal of the cell.
    pub fn cell_diameter(&self, cell: usize) -> T {
        let p = self.cell_coords(cell);
        let d = |a: Point<T>, b: Point<T>| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        d(p[0], p[2]).max(d(p[1], p[3]))
    }

    /// Bilinear map from the unit reference square to the cell.
    pub fn map_to_physical(&self, cell: usize, xi: Point<T>) -> Point<T> {
        let p = self.cell_coords(cell);
        let n = bilinear_shape(xi);
        let mut x = [T::zero(); 2];
        for i in 0..4 {
            x[0] += n[i] * p[i][0];
            x[1] += n[i] * p[i][1];
        }
        x
    }

    /// Jacobian `∂x/∂ξ` of the reference map, row-major `[[x_s, x_t], [y_s, y_t]]`.
    pub fn jacobian(&self, cell: usize, xi: Point<T>) -> [[T; 2]; 2] {
        let p = self.cell_coords(cell);
        let g = bilinear_shape_grad(xi);
        let mut jac = [[T::zero(); 2]; 2];
        for i in 0..4 {
            for r in 0..2 {
                for c in 0..2 {
                    jac[r][c] += p[i][r] * g[i][c];
                }
            }
        }
        jac
    }

    /// Reference coordinates of `x` in `cell` by Newton's method on the bilinear map.
    pub fn map_to_reference(&self, cell: usize, x: Point<T>) -> Point<T> {
        let mut xi = [T::half(), T::half()];
        for _ in 0..30 {
            let f = self.map_to_physical(cell, xi);
            let r = [x[0] - f[0], x[1] - f[1]];
            let j = self.jacobian(cell, xi);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let d0 = (j[1][1] * r[0] - j[0][1] * r[1]) / det;
            let d1 = (-j[1][0] * r[0] + j[0][0] * r[1]) / det;
            xi = [xi[0] + d0, xi[1] + d1];
            if d0.abs() + d1.abs() <= T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        xi
    }

    /// Active cell containing `x` and the reference coordinates of `x` in it.
    ///
    /// Points on shared edges resolve to the first matching cell in tree order.
    pub fn locate(&self, x: Point<T>) -> Result<(usize, Point<T>)> {
        let slack = T::lit(1e-10);
        let inside = |xi: Point<T>| xi.iter().all(|&s| s >= -slack && s <= T::one() + slack);
        let mut candidates: Vec<usize> = self.roots.clone();
        'descend: loop {
            for &c in &candidates {
                let xi = self.map_to_reference(c, x);
                if inside(xi) {
                    match self.cells[c].children {
                        None => {
                            let clamp = |s: T| s.max(T::zero()).min(T::one());
                            return Ok((c, [clamp(xi[0]), clamp(xi[1])]));
                        }
                        Some(ch) => {
                            candidates = ch.to_vec();
                            continue 'descend;
                        }
                    }
                }
            }
            return Err(Error::Domain(format!(
                "point ({}, {}) lies outside the mesh",
                x[0].to_f64_lossy(),
                x[1].to_f64_lossy()
            )));
        }
    }

    /// The four children of the cell's parent, when all of them are active.
    pub fn sibling_patch(&self, cell: usize) -> Option<[usize; 4]> {
        let parent = self.cells[cell].parent?;
        let children = self.cells[parent].children?;
        children.iter().all(|&c| self.cells[c].is_active()).then_some(children)
    }

    /// Refines every marked cell and then closes the mesh so that neighbors
    /// across any edge differ by at most one level.
    pub fn refine_with_closure(&self, marked: &BTreeSet<usize>) -> Result<Self> {
        for &c in marked {
            if c >= self.cells.len() || !self.cells[c].is_active() {
                return Err(Error::Usage(format!("cell {c} is not an active cell")));
            }
        }
        let mut mesh = self.clone();
        for &c in marked {
            mesh.split_cell(c);
        }
        // faces are only well defined once the mesh is closed again
        mesh.refresh_active();
        let bound = mesh.cells.len();
        let mut sweeps = 0;
        loop {
            let offenders: Vec<usize> = mesh.active.iter().copied().filter(|&c| mesh.violates_one_irregularity(c)).collect();
            if offenders.is_empty() {
                break;
            }
            sweeps += 1;
            assert!(sweeps <= bound, "refinement closure did not terminate");
            for c in offenders {
                mesh.split_cell(c);
            }
            mesh.refresh_active();
        }
        mesh.rebuild();
        Ok(mesh)
    }

    /// Uniform refinement of every active cell.
    pub fn refine_uniform(&self) -> Self {
        let all: BTreeSet<usize> = self.active.iter().copied().collect();
        self.refine_with_closure(&all).expect("active cells are valid marks")
    }

    fn violates_one_irregularity(&self, cell: usize) -> bool {
        (0..4).any(|e| {
            let [a, b] = self.cells[cell].edge(e);
            match self.midpoint(a, b) {
                Some(m) => self.midpoint(a, m).is_some() || self.midpoint(m, b).is_some(),
                None => false,
            }
        })
    }

    fn midpoint_or_insert(&mut self, a: usize, b: usize) -> usize {
        if let Some(m) = self.midpoint(a, b) {
            return m;
        }
        let (pa, pb) = (self.vertices[a].coords, self.vertices[b].coords);
        let id = self.vertices.len();
        self.vertices.push(Vertex { id, coords: [(pa[0] + pb[0]) * T::half(), (pa[1] + pb[1]) * T::half()] });
        self.midpoints.insert(key(a, b), id);
        self.split_edge_of.insert(id, key(a, b));
        id
    }

    fn split_cell(&mut self, cell: usize) {
        if !self.cells[cell].is_active() {
            return;
        }
        let parent = self.cells[cell].clone();
        let v = parent.vertices;
        let m: Vec<usize> = (0..4).map(|e| self.midpoint_or_insert(v[e], v[(e + 1) % 4])).collect();
        let pts = self.cell_coords(cell);
        let quarter = T::lit(0.25);
        let center = [
            (pts[0][0] + pts[1][0] + pts[2][0] + pts[3][0]) * quarter,
            (pts[0][1] + pts[1][1] + pts[2][1] + pts[3][1]) * quarter,
        ];
        let c = self.vertices.len();
        self.vertices.push(Vertex { id: c, coords: center });
        // child i keeps parent corner i at local position i
        let layouts = [[v[0], m[0], c, m[3]], [m[0], v[1], m[1], c], [c, m[1], v[2], m[2]], [m[3], c, m[2], v[3]]];
        let first = self.cells.len();
        for (i, verts) in layouts.into_iter().enumerate() {
            let mut boundary = [None; 4];
            boundary[i] = parent.boundary[i];
            boundary[(i + 3) % 4] = parent.boundary[(i + 3) % 4];
            self.cells.push(Cell {
                id: first + i,
                vertices: verts,
                level: parent.level + 1,
                parent: Some(cell),
                children: None,
                boundary,
            });
        }
        self.cells[cell].children = Some([first, first + 1, first + 2, first + 3]);
    }

    fn refresh_active(&mut self) {
        self.active = self.cells.iter().filter(|c| c.is_active()).map(|c| c.id).collect();
    }

    fn rebuild(&mut self) {
        self.refresh_active();
        self.edge_cells.clear();
        for &c in &self.active {
            for e in 0..4 {
                let [a, b] = self.cells[c].edge(e);
                self.edge_cells.entry(key(a, b)).or_default().push(c);
            }
        }
        self.edges.clear();
        for (&(a, b), cells) in &self.edge_cells {
            if cells.len() == 2 {
                self.edges.push(Edge { vertices: [a, b], cells: cells.clone(), hanging: None });
                continue;
            }
            if let Some(m) = self.midpoint(a, b) {
                let fine: Vec<usize> = [key(a, m), key(m, b)]
                    .iter()
                    .filter_map(|k| self.edge_cells.get(k))
                    .flatten()
                    .copied()
                    .collect();
                if fine.len() == 2 {
                    let mut all = cells.clone();
                    all.extend(fine);
                    self.edges.push(Edge { vertices: [a, b], cells: all, hanging: Some(m) });
                    continue;
                }
            }
            if self.coarse_partner(a, b).is_some() {
                continue;
            }
            self.edges.push(Edge { vertices: [a, b], cells: cells.clone(), hanging: None });
        }
        self.faces.clear();
        for &c in &self.active {
            for e in 0..4 {
                let [a, b] = self.cells[c].edge(e);
                let inner = FaceSide { cell: c, local_edge: e };
                let sharing = &self.edge_cells[&key(a, b)];
                if sharing.len() == 2 {
                    let other = if sharing[0] == c { sharing[1] } else { sharing[0] };
                    if c < other {
                        let outer = FaceSide { cell: other, local_edge: self.local_edge_of(other, a, b) };
                        self.faces.push(Face { vertices: [a, b], inner, outer: Some(outer), tag: None });
                    }
                    continue;
                }
                if let Some((coarse, (p, q))) = self.coarse_partner(a, b) {
                    let outer = FaceSide { cell: coarse, local_edge: self.local_edge_of(coarse, p, q) };
                    self.faces.push(Face { vertices: [a, b], inner, outer: Some(outer), tag: None });
                    continue;
                }
                let refined_across = self
                    .midpoint(a, b)
                    .is_some_and(|m| self.edge_cells.contains_key(&key(a, m)) && self.edge_cells.contains_key(&key(m, b)));
                if refined_across {
                    continue;
                }
                let tag = self.cells[c].boundary[e];
                debug_assert!(tag.is_some(), "edge without neighbor must be on the boundary");
                self.faces.push(Face { vertices: [a, b], inner, outer: None, tag });
            }
        }
    }

    /// `m` is the midpoint of a coarse edge with endpoint `other`.
    fn is_coarse_pair(&self, m: usize, other: usize) -> bool {
        self.split_edge_of
            .get(&m)
            .is_some_and(|&(p, q)| (p == other || q == other) && self.edge_cells.get(&(p, q)).is_some_and(|c| c.len() == 1))
    }

    /// The active coarse cell whose edge contains `(a, b)` as one half,
    /// together with that coarse edge.
    fn coarse_partner(&self, a: usize, b: usize) -> Option<(usize, (usize, usize))> {
        [(a, b), (b, a)].into_iter().find(|&(m, other)| self.is_coarse_pair(m, other)).map(|(m, _)| {
            let pq = self.split_edge_of[&m];
            (self.edge_cells[&pq][0], pq)
        })
    }

    fn local_edge_of(&self, cell: usize, a: usize, b: usize) -> usize {
        (0..4)
            .find(|&e| {
                let [p, q] = self.cells[cell].edge(e);
                key(p, q) == key(a, b)
            })
            .expect("edge belongs to cell")
    }

    /// Outward unit normal and length of a local edge.
    pub fn edge_normal(&self, cell: usize, e: usize) -> (Point<T>, T) {
        let [a, b] = self.cells[cell].edge(e);
        let (pa, pb) = (self.vertex(a), self.vertex(b));
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        let len = (dx * dx + dy * dy).sqrt();
        // counterclockwise ordering puts the interior on the left
        ([dy / len, -dx / len], len)
    }
}
