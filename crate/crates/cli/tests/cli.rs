use std::collections::BTreeSet;
use std::process::Command;
use std::sync::Arc;

use dwr_adapt::*;
use dwr_core::dwr::{ConvergenceRow, ConvergenceTable, StopReason, CSV_HEADER};
use dwr_core::fem::{FeFunction, FeSpace};
use dwr_core::linalg::linear_solve_count;
use dwr_core::mesh::Mesh;

fn config(problem: &str, tol: f64, dir: &std::path::Path) -> RunConfig {
    RunConfig { problem: problem.into(), tol, output_dir: dir.to_path_buf(), ..Default::default() }
}

/// Points and cells of a legacy VTK unstructured grid.
fn read_vtk(text: &str) -> (Vec<[f64; 2]>, Vec<[usize; 4]>, Vec<u32>) {
    let mut lines = text.lines();
    let mut points = Vec::new();
    let mut cells = Vec::new();
    let mut types = Vec::new();
    while let Some(line) = lines.next() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.first() {
            Some(&"POINTS") => {
                for _ in 0..words[1].parse::<usize>().unwrap() {
                    let v: Vec<f64> = lines.next().unwrap().split_whitespace().map(|w| w.parse().unwrap()).collect();
                    assert_eq!(v[2], 0.0);
                    points.push([v[0], v[1]]);
                }
            }
            Some(&"CELLS") => {
                for _ in 0..words[1].parse::<usize>().unwrap() {
                    let v: Vec<usize> = lines.next().unwrap().split_whitespace().map(|w| w.parse().unwrap()).collect();
                    assert_eq!(v[0], 4);
                    cells.push([v[1], v[2], v[3], v[4]]);
                }
            }
            Some(&"CELL_TYPES") => {
                for _ in 0..words[1].parse::<usize>().unwrap() {
                    types.push(lines.next().unwrap().trim().parse().unwrap());
                }
            }
            _ => {}
        }
    }
    (points, cells, types)
}

fn hanging_mesh() -> Mesh<f64> {
    let mesh = Mesh::create_rect_grid(2, 2, [0.0; 2], [1.0; 2]).unwrap();
    mesh.refine_with_closure(&BTreeSet::from([mesh.active_cells()[0]])).unwrap()
}

#[test]
fn vtk_round_trip_on_a_hanging_mesh() {
    let mesh = Arc::new(hanging_mesh());
    assert_eq!(mesh.n_active(), 7);
    let u = FeFunction::nodal_interpolate(FeSpace::build(mesh.clone(), 1), |x| x[0] / 3.0 + x[1]);
    let eta: Vec<f64> = (0..7).map(|k| k as f64 / 7.0).collect();
    let text = vtk_string(&mesh, &[("u_h", &u)], Some(&eta)).unwrap();
    let (points, cells, types) = read_vtk(&text);
    assert_eq!(cells.len(), 7);
    assert!(types.iter().all(|&t| t == 9));
    assert_eq!(points.len(), mesh.vertices().len());
    for v in mesh.vertices() {
        assert_eq!(points[v.id], v.coords);
    }
    for (&c, verts) in mesh.active_cells().iter().zip(&cells) {
        assert_eq!(&mesh.cell(c).vertices, verts);
    }
    assert!(text.contains(&format!("POINT_DATA {}\nSCALARS u_h double 1", points.len())));
    assert!(text.contains("CELL_DATA 7\nSCALARS eta_k double 1"));
}

#[test]
fn vtk_rejects_foreign_fields() {
    let mesh = hanging_mesh();
    let other = Arc::new(hanging_mesh());
    let u = FeFunction::zero(FeSpace::build(other, 1));
    assert!(matches!(vtk_string(&mesh, &[("u_h", &u)], None), Err(dwr_core::Error::Usage(_))));
    assert!(vtk_string(&mesh, &[], Some(&[1.0])).is_err());
}

#[test]
fn p1_run_reaches_the_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&RunConfig { emit_vtk: true, ..config("P1", 1e-3, dir.path()) }).unwrap();
    assert_eq!(report.exit_code, 0);
    let csv = std::fs::read_to_string(dir.path().join(TABLE_FILE)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert!(lines.len() >= 3, "{csv}");
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 8);
        assert!(!cols[6].is_empty());
    }
    let last_eta: f64 = lines.last().unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!(last_eta <= 1e-3);
    for k in 0..lines.len() - 1 {
        assert!(dir.path().join(format!("level_{k}.vtk")).exists());
    }
}

#[test]
fn identical_configs_give_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        run(&RunConfig { emit_vtk: true, ..config("P3", 3e-3, d.path()) }).unwrap();
    }
    for name in [TABLE_FILE, "level_0.vtk", "level_2.vtk"] {
        let read = |d: &tempfile::TempDir| std::fs::read(d.path().join(name)).unwrap();
        assert_eq!(read(&a), read(&b), "{name}");
    }
}

#[test]
fn dof_budget_gives_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&RunConfig { max_dofs: 100, ..config("P1L", 1e-9, dir.path()) }).unwrap();
    assert_eq!(report.table.stop, Some(StopReason::MaxDofs));
    assert_eq!(report.exit_code, 2);
}

#[test]
fn eigen_and_control_pipelines_run() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&RunConfig { max_levels: 2, ..config("P4", 1e-9, dir.path()) }).unwrap();
    assert_eq!(report.table.rows.len(), 2);
    assert!(report.table.rows[0].j_h > 2.0 * std::f64::consts::PI.powi(2));
    let report = run(&RunConfig { max_levels: 1, ..config("P5", 1e-12, dir.path()) }).unwrap();
    let row = &report.table.rows[0];
    assert!((0.5..=2.0).contains(&row.i_eff.unwrap()));
}

#[test]
fn invalid_tolerance_is_rejected_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let before = linear_solve_count();
    let err = run(&config("P1", -1.0, &out)).unwrap_err();
    assert_eq!(linear_solve_count(), before);
    assert_eq!(err.exit_code(), EXIT_USAGE);
    assert!(!out.exists());
}

#[test]
fn missing_reference_leaves_the_column_blank() {
    let row = |i_eff| ConvergenceRow {
        level: 0,
        n_dofs: 4,
        n_cells: 1,
        j_h: 1.0,
        eta: 0.5,
        signed_estimate: 0.5,
        i_eff,
        wall_time_s: 0.0,
    };
    let table = ConvergenceTable { rows: vec![row(None), row(Some(1.0))], ..Default::default() };
    let csv = table.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[1].split(',').nth(6), Some(""));
    assert_eq!(lines[2].split(',').nth(6), Some("1.0000000000e+00"));
    assert!(lines.iter().all(|l| l.split(',').count() == 8));
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dwr-adapt"))
}

#[test]
fn unknown_problem_lists_the_registry() {
    let out = binary().args(["run", "--problem", "P9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(64));
    let msg = String::from_utf8(out.stderr).unwrap();
    for name in ["P1", "P1L", "P2", "P3", "P4", "P4n", "P5"] {
        assert!(msg.contains(name), "{msg}");
    }
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"problem": "P9", "tol": 1e-6, "strategy": {"kind": "uniform"}}"#).unwrap();
    let out = binary()
        .args(["run", "--config", cfg.to_str().unwrap(), "--problem", "P1", "--max-dofs", "50", "--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o").join(TABLE_FILE)).unwrap();
    let cells: Vec<usize> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(cells, vec![16, 64]);
}

#[test]
fn list_prints_seven_problems() {
    let out = binary().arg("list").output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 7);
}
