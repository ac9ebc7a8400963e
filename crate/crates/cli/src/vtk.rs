use dwr_core::fem::FeFunction;
use dwr_core::mesh::Mesh;
use dwr_core::{Error, Result};

/// Legacy ASCII VTK of the active cells, with nodal values of each field and
/// optionally one scalar per active cell named `eta_k`.
///
/// Every vertex of the mesh is written, in id order; numbers use the shortest
/// representation that parses back to the same `f64`.
pub fn vtk_string(mesh: &Mesh<f64>, fields: &[(&str, &FeFunction<f64>)], eta: Option<&[f64]>) -> Result<String> {
    for (name, f) in fields {
        if !std::ptr::eq(&**f.mesh(), mesh) {
            return Err(Error::Usage(format!("field {name} lives on another mesh")));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Usage(format!("invalid field name {name:?}")));
        }
    }
    let cells = mesh.active_cells();
    if let Some(eta) = eta {
        if eta.len() != cells.len() {
            return Err(Error::Usage(format!("{} cell values for {} active cells", eta.len(), cells.len())));
        }
    }
    let vertices = mesh.vertices();
    let mut out = String::from("# vtk DataFile Version 3.0\ndwr-adapt\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let mut w = |s: String| out.push_str(&s);
    w(format!("POINTS {} double\n", vertices.len()));
    for v in vertices {
        w(format!("{} {} 0\n", v.coords[0], v.coords[1]));
    }
    w(format!("CELLS {} {}\n", cells.len(), 5 * cells.len()));
    for &c in cells {
        let [a, b, p, q] = mesh.cell(c).vertices;
        w(format!("4 {a} {b} {p} {q}\n"));
    }
    w(format!("CELL_TYPES {}\n", cells.len()));
    for _ in cells {
        w("9\n".into());
    }
    if !fields.is_empty() {
        w(format!("POINT_DATA {}\n", vertices.len()));
        for (name, f) in fields {
            w(format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
            for value in nodal_values(mesh, f)? {
                w(format!("{value}\n"));
            }
        }
    }
    if let Some(eta) = eta {
        w(format!("CELL_DATA {}\nSCALARS eta_k double 1\nLOOKUP_TABLE default\n", cells.len()));
        for v in eta {
            w(format!("{v}\n"));
        }
    }
    Ok(out)
}

fn nodal_values(mesh: &Mesh<f64>, f: &FeFunction<f64>) -> Result<Vec<f64>> {
    let space = f.space();
    mesh.vertices()
        .iter()
        .map(|v| match space.vertex_dof(v.id) {
            Some(d) => Ok(f.coefficients()[d]),
            None => f.evaluate(v.coords),
        })
        .collect()
}

pub fn write_vtk(
    path: impl AsRef<std::path::Path>,
    mesh: &Mesh<f64>,
    fields: &[(&str, &FeFunction<f64>)],
    eta: Option<&[f64]>,
) -> std::result::Result<(), crate::CliError> {
    let text = vtk_string(mesh, fields, eta)?;
    std::fs::write(path, text)?;
    Ok(())
}
