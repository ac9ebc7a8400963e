//! Weighted residuals in weak form and their cell-wise localization.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::assembly::{segment_quadrature, FormDescriptor};
use crate::fem::quadrature::gauss_square;
use crate::fem::{physical_basis, FeFunction, Sample};
use crate::mesh::{BoundaryTag, Face, Mesh};
use crate::problems::GoalSample;
use crate::{Point, Real};

/// Density of a volume or boundary load at `(cell, xi, x)`.
pub type Density<'a, T> = &'a dyn Fn(usize, Point<T>, Point<T>) -> T;

/// Everything that makes up `ρ(w) = ℓ(w) − a(u)(w)` (primal) or
/// `ρ*(w) = ℓ(w) − a′(u)(w, z)` (adjoint) apart from the fields themselves.
#[derive(Clone, Copy)]
pub struct ResidualData<'a, T> {
    pub form: &'a FormDescriptor<T>,
    /// Volume part of `ℓ`.
    pub density: Option<Density<'a, T>>,
    /// Point-sample part of `ℓ` (goal functionals).
    pub samples: &'a [GoalSample<T>],
    /// Boundary part of `ℓ` on non-Dirichlet faces.
    pub neumann: Option<Density<'a, T>>,
    pub dirichlet_tags: &'a [BoundaryTag],
}

impl<'a, T: Real> ResidualData<'a, T> {
    pub fn new(form: &'a FormDescriptor<T>, dirichlet_tags: &'a [BoundaryTag]) -> Self {
        Self { form, density: None, samples: &[], neumann: None, dirichlet_tags }
    }

    fn is_dirichlet(&self, face: &Face) -> bool {
        face.tag.is_some_and(|t| self.dirichlet_tags.contains(&t))
    }
}

fn same_mesh<T: Real>(fields: &[&FeFunction<T>]) -> Result<Arc<crate::mesh::Mesh<T>>> {
    let mesh = fields[0].mesh().clone();
    if fields.iter().any(|f| !Arc::ptr_eq(f.mesh(), &mesh)) {
        return Err(Error::Usage("residual fields live on different meshes".into()));
    }
    Ok(mesh)
}

fn position_of(mesh: &Mesh<impl Real>) -> Vec<usize> {
    let mut pos = vec![usize::MAX; mesh.cells().len()];
    for (i, &c) in mesh.active_cells().iter().enumerate() {
        pos[c] = i;
    }
    pos
}

/// Samples of every field at the cell quadrature points, with `|J|·w`.
fn cell_samples<T: Real>(mesh: &Mesh<T>, c: usize, fields: &[&FeFunction<T>]) -> Vec<(Point<T>, Point<T>, T, Vec<Sample<T>>)> {
    gauss_square::<T>(crate::fem::assembly::QUAD_POINTS)
        .into_iter()
        .map(|(xi, w)| {
            let samples: Vec<Sample<T>> = fields
                .iter()
                .map(|f| f.sample_with(c, &physical_basis(mesh, c, f.space().degree(), xi)))
                .collect();
            let x = mesh.map_to_physical(c, xi);
            let j = mesh.jacobian(c, xi);
            let det = (j[0][0] * j[1][1] - j[0][1] * j[1][0]).abs();
            (xi, x, w * det, samples)
        })
        .collect()
}

fn sample_at<T: Real>(f: &FeFunction<T>, cell: usize, x: Point<T>) -> Sample<T> {
    let mesh = f.mesh();
    f.sample(cell, mesh.map_to_reference(cell, x))
}

fn load_samples<T: Real>(data: &ResidualData<'_, T>, w: &FeFunction<T>, pos: &[usize], out: &mut [T]) {
    for s in data.samples {
        out[pos[s.cell]] += s.weight * w.value_at(s.cell, s.xi);
    }
}

/// `ρ(u)(w) = ℓ(w) − a(u)(w)` by cell quadrature.
pub fn weak_primal<T: Real>(data: &ResidualData<'_, T>, u: &FeFunction<T>, w: &FeFunction<T>) -> Result<T> {
    let mesh = same_mesh(&[u, w])?;
    let mut total = T::zero();
    for &c in mesh.active_cells() {
        for (xi, x, jxw, s) in cell_samples(&mesh, c, &[u, w]) {
            let load = data.density.map_or(T::zero(), |d| d(c, xi, x));
            total += (load * s[1].value - data.form.integrand(x, &s[0], &s[1])) * jxw;
        }
    }
    total += boundary_load(data, &mesh, w);
    total += data.samples.iter().map(|s| s.weight * w.value_at(s.cell, s.xi)).sum::<T>();
    Ok(total)
}

/// `ρ*(z)(w) = ℓ(w) − a′(u)(w, z)` by cell quadrature.
pub fn weak_adjoint<T: Real>(
    data: &ResidualData<'_, T>,
    u: &FeFunction<T>,
    z: &FeFunction<T>,
    w: &FeFunction<T>,
) -> Result<T> {
    let mesh = same_mesh(&[u, z, w])?;
    let mut total = T::zero();
    for &c in mesh.active_cells() {
        for (xi, x, jxw, s) in cell_samples(&mesh, c, &[u, z, w]) {
            let load = data.density.map_or(T::zero(), |d| d(c, xi, x));
            total += (load * s[2].value - data.form.linearized_integrand(x, &s[0], &s[2], &s[1])) * jxw;
        }
    }
    total += boundary_load(data, &mesh, w);
    total += data.samples.iter().map(|s| s.weight * w.value_at(s.cell, s.xi)).sum::<T>();
    Ok(total)
}

fn boundary_load<T: Real>(data: &ResidualData<'_, T>, mesh: &Mesh<T>, w: &FeFunction<T>) -> T {
    let Some(g) = data.neumann else { return T::zero() };
    let mut total = T::zero();
    for face in mesh.faces().iter().filter(|f| f.outer.is_none() && !data.is_dirichlet(f)) {
        let c = face.inner.cell;
        for (x, ds) in segment_quadrature(mesh.vertex(face.vertices[0]), mesh.vertex(face.vertices[1])) {
            let xi = mesh.map_to_reference(c, x);
            total += g(c, xi, x) * w.value_at(c, xi) * ds;
        }
    }
    total
}

/// Cell contributions of `ρ(u)(w)` from the strong form: cell residual
/// `f − L(u)`, half the normal-flux jump `−½ν[∂ₙu]` on interior faces and
/// `g − ν∂ₙu` on natural boundary faces. Returned in active-cell order.
pub fn localize_primal<T: Real>(data: &ResidualData<'_, T>, u: &FeFunction<T>, w: &FeFunction<T>) -> Result<Vec<T>> {
    let mesh = same_mesh(&[u, w])?;
    let pos = position_of(&mesh);
    let mut out = vec![T::zero(); mesh.n_active()];
    for (k, &c) in mesh.active_cells().iter().enumerate() {
        for (xi, x, jxw, s) in cell_samples(&mesh, c, &[u, w]) {
            let strong = data
                .form
                .strong(x, &s[0])
                .ok_or_else(|| Error::Usage("custom form terms cannot be localized".into()))?;
            let load = data.density.map_or(T::zero(), |d| d(c, xi, x));
            out[k] += (load - strong) * s[1].value * jxw;
        }
    }
    let nu = data.form.diffusion();
    face_terms(&mesh, data, &pos, &mut out, |x, inner, outer, n| {
        let gi = sample_at(u, inner, x).grad;
        let flux_in = nu * (gi[0] * n[0] + gi[1] * n[1]);
        let wv = sample_at(w, inner, x).value;
        match outer {
            Some(o) => {
                let go = sample_at(u, o, x).grad;
                let flux_out = nu * (go[0] * n[0] + go[1] * n[1]);
                -T::half() * (flux_in - flux_out) * wv
            }
            None => {
                let xi = mesh.map_to_reference(inner, x);
                let g = data.neumann.map_or(T::zero(), |g| g(inner, xi, x));
                (g - flux_in) * wv
            }
        }
    });
    load_samples(data, w, &pos, &mut out);
    Ok(out)
}

/// Cell contributions of `ρ*(z)(w)`: cell residual `ℓ − L′(u)*z`, half the
/// jump `−½ν[∂ₙz]` on interior faces (the advective fluxes cancel) and
/// `g − ν∂ₙz − β·n z` on natural boundary faces.
pub fn localize_adjoint<T: Real>(
    data: &ResidualData<'_, T>,
    u: &FeFunction<T>,
    z: &FeFunction<T>,
    w: &FeFunction<T>,
) -> Result<Vec<T>> {
    let mesh = same_mesh(&[u, z, w])?;
    let pos = position_of(&mesh);
    let mut out = vec![T::zero(); mesh.n_active()];
    for (k, &c) in mesh.active_cells().iter().enumerate() {
        for (xi, x, jxw, s) in cell_samples(&mesh, c, &[u, z, w]) {
            let strong = data
                .form
                .strong_adjoint(x, &s[0], &s[1])
                .ok_or_else(|| Error::Usage("custom form terms cannot be localized".into()))?;
            let load = data.density.map_or(T::zero(), |d| d(c, xi, x));
            out[k] += (load - strong) * s[2].value * jxw;
        }
    }
    let nu = data.form.diffusion();
    face_terms(&mesh, data, &pos, &mut out, |x, inner, outer, n| {
        let si = sample_at(z, inner, x);
        let flux_in = nu * (si.grad[0] * n[0] + si.grad[1] * n[1]);
        let wv = sample_at(w, inner, x).value;
        match outer {
            Some(o) => {
                let go = sample_at(z, o, x).grad;
                let flux_out = nu * (go[0] * n[0] + go[1] * n[1]);
                -T::half() * (flux_in - flux_out) * wv
            }
            None => {
                let b = data.form.advection(x);
                let xi = mesh.map_to_reference(inner, x);
                let g = data.neumann.map_or(T::zero(), |g| g(inner, xi, x));
                (g - flux_in - (b[0] * n[0] + b[1] * n[1]) * si.value) * wv
            }
        }
    });
    load_samples(data, w, &pos, &mut out);
    Ok(out)
}

/// Boundary-data term `−∫_{Γ_D} (g − u) ν∂ₙz ds` per active cell. It is
/// nonzero when the discrete space only interpolates the Dirichlet values.
pub fn dirichlet_data_terms<T: Real>(
    form: &FormDescriptor<T>,
    g: &dyn Fn(Point<T>) -> T,
    dirichlet_tags: &[BoundaryTag],
    u: &FeFunction<T>,
    z: &FeFunction<T>,
) -> Result<Vec<T>> {
    let mesh = same_mesh(&[u, z])?;
    let pos = position_of(&mesh);
    let nu = form.diffusion();
    let mut out = vec![T::zero(); mesh.n_active()];
    for face in mesh.faces() {
        if face.outer.is_some() || !face.tag.is_some_and(|t| dirichlet_tags.contains(&t)) {
            continue;
        }
        let c = face.inner.cell;
        let (n, _) = mesh.edge_normal(c, face.inner.local_edge);
        for (x, ds) in segment_quadrature(mesh.vertex(face.vertices[0]), mesh.vertex(face.vertices[1])) {
            let xi = mesh.map_to_reference(c, x);
            let grad = z.sample(c, xi).grad;
            out[pos[c]] -= (g(x) - u.value_at(c, xi)) * nu * (grad[0] * n[0] + grad[1] * n[1]) * ds;
        }
    }
    Ok(out)
}

/// Integrates `term(x, inner, outer, n_inner)` over every face. Interior
/// face values go to both adjacent cells, boundary values to the inner cell;
/// Dirichlet faces are skipped.
fn face_terms<T: Real>(
    mesh: &Mesh<T>,
    data: &ResidualData<'_, T>,
    pos: &[usize],
    out: &mut [T],
    term: impl Fn(Point<T>, usize, Option<usize>, Point<T>) -> T,
) {
    for face in mesh.faces() {
        if face.outer.is_none() && data.is_dirichlet(face) {
            continue;
        }
        let inner = face.inner.cell;
        let outer = face.outer.map(|o| o.cell);
        let (n, _) = mesh.edge_normal(inner, face.inner.local_edge);
        let mut acc = T::zero();
        for (x, ds) in segment_quadrature(mesh.vertex(face.vertices[0]), mesh.vertex(face.vertices[1])) {
            acc += term(x, inner, outer, n) * ds;
        }
        out[pos[inner]] += acc;
        if let Some(o) = outer {
            out[pos[o]] += acc;
        }
    }
}

/// `Σ_faces |[∂ₙu]|·|face|` per active cell, with the jump taken at the face
/// midpoint; natural boundary faces contribute `|∂ₙu|`.
pub fn gradient_jumps<T: Real>(u: &FeFunction<T>, dirichlet_tags: &[BoundaryTag]) -> Vec<T> {
    let mesh = u.mesh();
    let pos = position_of(mesh);
    let mut out = vec![T::zero(); mesh.n_active()];
    for face in mesh.faces() {
        let inner = face.inner.cell;
        if face.outer.is_none() && face.tag.is_some_and(|t| dirichlet_tags.contains(&t)) {
            continue;
        }
        let (a, b) = (mesh.vertex(face.vertices[0]), mesh.vertex(face.vertices[1]));
        let x = [(a[0] + b[0]) * T::half(), (a[1] + b[1]) * T::half()];
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let (n, _) = mesh.edge_normal(inner, face.inner.local_edge);
        let gi = sample_at(u, inner, x).grad;
        let mut jump = gi[0] * n[0] + gi[1] * n[1];
        if let Some(o) = face.outer {
            let go = sample_at(u, o.cell, x).grad;
            jump -= go[0] * n[0] + go[1] * n[1];
            out[pos[o.cell]] += jump.abs() * len;
        }
        out[pos[inner]] += jump.abs() * len;
    }
    out
}
