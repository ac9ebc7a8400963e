use std::f64::consts::PI;
use std::sync::Arc;

use dwr_core::dwr::solve::solve_primal;
use dwr_core::fem::assembly::{assemble_adjoint_operator, assemble_operator};
use dwr_core::fem::FeSpace;
use dwr_core::mesh::Mesh;
use dwr_core::problems::*;
use dwr_core::Error;
use proptest::prelude::*;

#[test]
fn registry_holds_seven_named_problems() {
    let all = registry::<f64>();
    assert_eq!(all.len(), 7);
    let names: Vec<_> = all.iter().map(|p| p.name).collect();
    assert_eq!(names, problem_names());
    assert!(find::<f64>("P9").is_none());
    for p in &all {
        assert!(!p.description.is_empty());
    }
}

proptest! {
    #[test]
    fn semilinear_source_matches_manufactured_solution(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let p3 = find::<f64>("P3").unwrap();
        let exact = p3.exact_solution.clone().unwrap();
        let u = (PI * x).sin() * (PI * y).sin();
        prop_assert!((exact([x, y]) - u).abs() < 1e-14);
        // −Δ(sin πx sin πy) = 2π² sin πx sin πy
        let strong = 2.0 * PI * PI * u + u.powi(3);
        prop_assert!(((p3.source)([x, y]) - strong).abs() <= 1e-12);
    }
}

#[test]
fn advection_dual_operator_is_the_transpose() {
    let p2 = find::<f64>("P2").unwrap();
    let space = FeSpace::build(Arc::new(p2.initial_mesh().refine_uniform()), 1);
    let a = assemble_operator(&space, &p2.form, None).unwrap();
    let at = assemble_adjoint_operator(&space, &p2.form, None).unwrap();
    let t = a.transpose().to_dense();
    let d = at.to_dense();
    let mut asymmetric = false;
    for i in 0..t.len() {
        for j in 0..t.len() {
            assert!((t[i][j] - d[i][j]).abs() <= 1e-13, "({i},{j})");
            asymmetric |= (t[i][j] - t[j][i]).abs() > 1e-6;
        }
    }
    assert!(asymmetric);
}

#[test]
fn reference_values() {
    let mesh = Mesh::create_rect_grid(4, 4, [0.0; 2], [1.0; 2]).unwrap();
    let p4 = find::<f64>("P4").unwrap();
    assert!((p4.reference_value(&mesh).unwrap().unwrap() - 2.0 * PI * PI).abs() < 1e-12);
    let p3 = find::<f64>("P3").unwrap();
    assert!((p3.reference_value(&mesh).unwrap().unwrap() - 0.405_284_7).abs() < 1e-6);

    // ∫₀^½ sin πx dx = 1/π, over an area of ¼
    let goal = p3.goal.clone().unwrap();
    let fine = Mesh::create_rect_grid(16, 16, [0.0; 2], [1.0; 2]).unwrap();
    let mean = goal.evaluate_exact(&fine, |x| p3.exact_solution.as_ref().unwrap()(x)).unwrap();
    assert!((mean - 4.0 / (PI * PI)).abs() < 1e-6);
}

#[test]
fn poisson_series_center() {
    let (v, tail): (f64, f64) = poisson_series([0.5, 0.5], SERIES_ORDER);
    assert!((v - 0.073_67).abs() < 1e-5, "{v}");
    assert!(tail < 1e-7);
    // symmetric in both axes
    let (a, _): (f64, f64) = poisson_series([0.25, 0.7], 99);
    let (b, _): (f64, f64) = poisson_series([0.75, 0.3], 99);
    assert!((a - b).abs() < 1e-14);
}

#[test]
fn disc_mean_reference_subtracts_radius_term() {
    let p1 = find::<f64>("P1").unwrap();
    let mesh = p1.initial_mesh();
    let r = p1.goal.as_ref().unwrap().radius(&mesh).unwrap().unwrap();
    let expected = poisson_series([0.5, 0.5], SERIES_ORDER).0 - r * r / 8.0;
    assert!((p1.reference_value(&mesh).unwrap().unwrap() - expected).abs() < 1e-15);
}

fn fine_mesh() -> Mesh<f64> {
    Mesh::create_rect_grid(16, 16, [0.0; 2], [1.0; 2]).unwrap()
}

#[test]
fn regularized_point_value_examples() {
    let mesh = fine_mesh();
    let x0 = [0.4, 0.55];
    let goal = regularize_point_value(x0, &mesh).unwrap();
    let r = goal.radius(&mesh).unwrap().unwrap();
    assert!((r - 2f64.sqrt() / 16.0).abs() < 1e-15);

    let c = goal.evaluate_exact(&mesh, |_| 3.5).unwrap();
    assert!((c - 3.5).abs() < 1e-10);
    let lin = goal.evaluate_exact(&mesh, |x| 2.0 * x[0] - x[1] + 0.25).unwrap();
    assert!((lin - (2.0 * x0[0] - x0[1] + 0.25)).abs() < 1e-10);
    let quad = goal.evaluate_exact(&mesh, |x| x[0] * x[0]).unwrap();
    assert!((quad - x0[0] * x0[0] - r * r / 4.0).abs() < 1e-10);
}

#[test]
fn disc_shrinks_near_the_boundary() {
    let mesh = fine_mesh();
    let goal = regularize_point_value([0.03, 0.5], &mesh).unwrap();
    let r = goal.radius(&mesh).unwrap().unwrap();
    assert!(r <= 0.03 && r > 0.0);
    let c = goal.evaluate_exact(&mesh, |_| 1.0).unwrap();
    assert!((c - 1.0).abs() < 1e-12);
}

#[test]
fn point_outside_domain_is_rejected() {
    let mesh = fine_mesh();
    assert!(matches!(regularize_point_value([1.5, 0.5], &mesh), Err(Error::Domain(_))));
    let lshape = Mesh::create_lshape();
    assert!(matches!(regularize_point_value([0.5, -0.5], &lshape), Err(Error::Domain(_))));
}

#[test]
fn outflow_flux_matches_a_fine_quadratic_solve() {
    let p2 = find::<f64>("P2").unwrap();
    let mesh = (0..3).fold(p2.initial_mesh(), |m, _| m.refine_uniform());
    let space = FeSpace::build(Arc::new(mesh), 2);
    let u = solve_primal(&p2, &space).unwrap();
    let flux = p2.goal.as_ref().unwrap().evaluate(&u).unwrap();
    let exact = advection_outflow_flux(0.01);
    assert!((flux - exact).abs() < 1e-6 * exact, "{flux} vs {exact}");
}
