use std::sync::Arc;

use dwr_core::fem::{FeFunction, FeSpace};
use dwr_core::linalg::linear_solve_count;
use dwr_core::mesh::Mesh;
use dwr_core::optctrl::*;
use dwr_core::problems::find;
use dwr_core::{Error, Point};

fn grid(n: usize) -> Arc<Mesh<f64>> {
    Arc::new(Mesh::create_rect_grid(n, n, [0.0, 0.0], [1.0, 1.0]).unwrap())
}

fn standard() -> ControlProblem<f64> {
    ControlProblem::from_definition(&find("P5").unwrap()).unwrap()
}

/// Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

#[test]
fn reduced_solve_matches_dense_kkt() {
    let cp = standard();
    for n in [2, 4] {
        let mesh = grid(n);
        let sol = solve_kkt(&cp, mesh.clone()).unwrap();
        let sys = assemble_kkt(&cp, &FeSpace::build(mesh, 1)).unwrap();
        let (a, mb, mo) = (sys.a.to_dense(), sys.boundary_mass.to_dense(), sys.observation_mass.to_dense());
        let (nd, c) = (a.len(), &sys.control_dofs);
        let size = 2 * nd + c.len();
        let mut k = vec![vec![0.0; size]; size];
        let mut rhs = vec![0.0; size];
        // unknowns [u, q_c, z]
        for i in 0..nd {
            for j in 0..nd {
                k[i][j] = a[i][j];
                k[nd + c.len() + i][nd + c.len() + j] = a[j][i];
                k[nd + c.len() + i][j] = -mo[i][j];
            }
            for (jc, &j) in c.iter().enumerate() {
                k[i][nd + jc] = -mb[i][j];
            }
            rhs[nd + c.len() + i] = -sys.observation_load[i];
        }
        for (ic, &i) in c.iter().enumerate() {
            for (jc, &j) in c.iter().enumerate() {
                k[nd + ic][nd + jc] = cp.alpha * mb[i][j];
            }
            for j in 0..nd {
                k[nd + ic][nd + c.len() + j] = mb[i][j];
            }
        }
        let x = dense_solve(k, rhs);
        for i in 0..nd {
            assert!((x[i] - sol.u_h.coefficients()[i]).abs() < 1e-9, "u at {i}");
            assert!((x[nd + c.len() + i] - sol.z_h.coefficients()[i]).abs() < 1e-9, "z at {i}");
        }
        for (ic, &i) in c.iter().enumerate() {
            assert!((x[nd + ic] - sol.q_h.coefficients()[i]).abs() < 1e-9, "q at {i}");
        }
    }
}

#[test]
fn optimality_residuals_vanish() {
    let cp = standard();
    let sol = solve_kkt(&cp, grid(8)).unwrap();
    let res = kkt_residuals(&cp, &sol).unwrap();
    assert!(res.iter().all(|&r| r <= 1e-10), "{res:?}");
    let g = reduced_gradient(&cp, &sol.q_h).unwrap();
    assert!(g.iter().all(|v| v.abs() <= 1e-10));
}

#[test]
fn attained_target_gives_zero_control() {
    // with q = 0 the state is 0, so the target 0 is attained
    let cp = standard().with_target(Arc::new(|_| 0.0));
    let sol = solve_kkt(&cp, grid(8)).unwrap();
    assert!(sol.q_h.coefficients().iter().all(|v| v.abs() <= 1e-10));
    assert!(cost(&cp, &sol.u_h, &sol.q_h).unwrap().abs() <= 1e-10);
    let est = control_error_estimate(&cp, &sol, Some(&recover(&sol).unwrap())).unwrap();
    assert!(est.estimate.primal_part.abs() <= 1e-10);
    assert!(est.estimate.dual_part.unwrap().abs() <= 1e-10);
    assert!(est.control_part.abs() <= 1e-10);
}

#[test]
fn control_shrinks_with_regularization() {
    let norm = |alpha: f64| {
        let cp = standard().with_alpha(alpha);
        let sol = solve_kkt(&cp, grid(4)).unwrap();
        sol.q_h.coefficients().iter().map(|v| v * v).sum::<f64>().sqrt()
    };
    let ratio = norm(1e6) / norm(1e8);
    assert!((90.0..110.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn finite_differences_confirm_gradient() {
    let cp = standard();
    let space = FeSpace::build(grid(8), 1);
    let sys = assemble_kkt(&cp, &space).unwrap();
    let control = |f: &dyn Fn(Point<f64>) -> f64| {
        let mut q = vec![0.0; space.dof_count()];
        for &d in &sys.control_dofs {
            q[d] = f(space.support_point(d));
        }
        FeFunction::from_coefficients(space.clone(), q)
    };
    let q = control(&|x| 1.0 + x[1]);
    let dq = control(&|x| (3.0 * x[1]).cos());
    let j = |q: &FeFunction<f64>| cost(&cp, &state_for_control(&cp, q).unwrap(), q).unwrap();
    let g = reduced_gradient(&cp, &q).unwrap();
    let directional: f64 = sys.control_dofs.iter().zip(&g).map(|(&d, gi)| gi * dq.coefficients()[d]).sum();
    let j0 = j(&q);
    for eps in [1e-4, 1e-6] {
        let shifted = FeFunction::from_coefficients(
            space.clone(),
            q.coefficients().iter().zip(dq.coefficients()).map(|(a, b)| a + eps * b).collect(),
        );
        let fd = (j(&shifted) - j0) / eps;
        assert!((fd - directional).abs() <= 1e-3 * directional.abs(), "eps {eps}: {fd} vs {directional}");
    }
}

#[test]
fn estimate_is_reflection_invariant() {
    let base = standard();
    let target = |x: Point<f64>| x[0] * x[1] * x[1] + 0.3 * x[1];
    let cp = base.clone().with_target(Arc::new(target));
    let mirrored = base.with_target(Arc::new(move |x: Point<f64>| target([x[0], 1.0 - x[1]])));
    let estimate = |cp: &ControlProblem<f64>| {
        let sol = solve_kkt(cp, grid(8)).unwrap();
        control_error_estimate(cp, &sol, Some(&recover(&sol).unwrap())).unwrap().estimate
    };
    let (a, b) = (estimate(&cp), estimate(&mirrored));
    assert!((a.signed_estimate - b.signed_estimate).abs() <= 1e-10);
    assert!((a.eta_global - b.eta_global).abs() <= 1e-10);
}

#[test]
fn estimator_uses_no_solves_and_needs_recovery() {
    let cp = standard();
    let sol = solve_kkt(&cp, grid(8)).unwrap();
    let rec = recover(&sol).unwrap();
    let before = linear_solve_count();
    let est = control_error_estimate(&cp, &sol, Some(&rec)).unwrap();
    assert_eq!(linear_solve_count(), before);
    assert_eq!(est.estimate.cells.len(), 64);
    assert!(matches!(control_error_estimate(&cp, &sol, None), Err(Error::Usage(_))));
}

#[test]
fn effectivity_against_refined_reference() {
    let p = find::<f64>("P5").unwrap();
    let cp = standard();
    let mesh = p.initial_mesh();
    let sol = solve_kkt(&cp, Arc::new(mesh.clone())).unwrap();
    let j = cost(&cp, &sol.u_h, &sol.q_h).unwrap();
    let reference = reference_cost(&cp, &mesh, 2).unwrap();
    let est = control_error_estimate(&cp, &sol, Some(&recover(&sol).unwrap())).unwrap();
    let i_eff = (reference - j).abs() / est.estimate.signed_estimate.abs();
    assert!((0.5..=2.0).contains(&i_eff), "{i_eff}");
    let enriched = enriched_cost(&cp, &sol, 2).unwrap();
    assert!((enriched - reference).abs() < (j - reference).abs());
}

#[test]
fn invalid_regularization_is_rejected() {
    let cp = standard().with_alpha(0.0);
    assert!(matches!(solve_kkt(&cp, grid(2)), Err(Error::Domain(_))));
}
