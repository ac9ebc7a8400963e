//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criterion 5 is a known failure (the adaptive run needs about 0.64 of the
//! uniform DOF count at the requested accuracy, not 0.25). It is reported as
//! FAIL and does not fail the target; any other failure does, and so does
//! criterion 5 unexpectedly passing, so the list stays truthful.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;

use dwr_core::dwr::solve::{solve_dual, solve_primal};
use dwr_core::dwr::*;
use dwr_core::eigen::{compare_with_reference, eigen_error_estimate, solve_eigen_pair, EigenProblem};
use dwr_core::fem::{patch_recover, FeFunction, FeSpace};
use dwr_core::linalg::linear_solve_count;
use dwr_core::mesh::Mesh;
use dwr_core::optctrl::{
    control_error_estimate, cost, recover, reduced_gradient, reference_cost, solve_kkt, state_for_control,
    assemble_kkt, ControlProblem,
};
use dwr_core::problems::{find, ProblemDefinition};

const KNOWN_FAILURES: &[usize] = &[5];

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn problem(name: &str) -> ProblemDefinition<f64> {
    find(name).expect("registered problem")
}

fn table_arithmetic() -> Outcome {
    let rows: [(f64, f64, f64); 3] = [(5.59431, 3.1e-2, 0.47), (5.58980, 1.8e-2, 0.58), (5.58507, 8.0e-3, 0.69)];
    let mut detail = Vec::new();
    let mut ok = true;
    for (j_h, eta, printed) in rows {
        let i = effectivity_index(5.57953, j_h, eta).map_err(|e| e.to_string())?;
        ok &= (i - printed).abs() <= 0.02;
        detail.push(format!("{i:.3}"));
    }
    check(ok, format!("I_eff {}", detail.join(", ")))
}

fn linear_exactness() -> Outcome {
    let p1 = problem("P1");
    let mesh = Mesh::create_rect_grid(16, 16, [0.0; 2], [1.0; 2]).map_err(|e| e.to_string())?;
    let space = FeSpace::build(Arc::new(mesh), 1);
    let goal = p1.goal.clone().unwrap();
    let u = solve_primal(&p1, &space).map_err(|e| e.to_string())?;
    let resolved = goal.resolve(space.mesh()).map_err(|e| e.to_string())?;
    let j_ref = p1.reference_value(space.mesh()).map_err(|e| e.to_string())?.unwrap();
    let error = j_ref - resolved.evaluate(&u).map_err(|e| e.to_string())?;
    let estimate = verification_estimate(&p1, &goal, &u, 2).map_err(|e| e.to_string())?;
    let rel = (estimate - error).abs() / error.abs();
    check(rel <= 0.02, format!("estimate {estimate:.4e}, error {error:.4e}, relative gap {rel:.2e}"))
}

fn abstract_identity() -> Outcome {
    let a = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
    let b = vec![1.0, 0.0];
    let l = AbstractFunctional::quadratic(&a, &b);
    let (x, x_h) = ([2.0 / 3.0, -1.0 / 3.0], [0.5, 0.0]);
    let est = abstract_error_identity(&l, &x, &x_h, &x_h).estimate;
    let value = |v: &[f64]| {
        let av = [2.0 * v[0] + v[1], v[0] + 2.0 * v[1]];
        0.5 * (v[0] * av[0] + v[1] * av[1]) - v[0]
    };
    let diff = value(&x) - value(&x_h);
    let (left, right) = trapezoid_kernel_check(|s: f64| s * s, |_| 2.0);
    let ok = (est + 1.0 / 12.0).abs() <= 1e-12
        && (diff + 1.0 / 12.0).abs() <= 1e-12
        && (left + 1.0 / 6.0).abs() <= 1e-12
        && (right + 1.0 / 6.0).abs() <= 1e-12;
    check(ok, format!("estimate {est:.15}, L(x)-L(x_h) {diff:.15}, trapezoid {left:.15} / {right:.15}"))
}

fn practical_effectivity() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in ["P1", "P1L"] {
        let p = problem(name);
        let options = AdaptOptions::new(1e-12, MarkingStrategy::ErrorBalancing { theta: 1.0 }, usize::MAX).with_max_levels(6);
        let table = adapt_loop(&p, p.goal.as_ref().unwrap(), &options).map_err(|e| e.to_string())?;
        ok &= table.rows.len() == 6;
        let values: Vec<f64> = table.rows.iter().map(|r| r.i_eff.unwrap_or(f64::NAN)).collect();
        ok &= values[2..].iter().all(|i| (0.3..=3.0).contains(i));
        detail.push(format!("{name} {}", values.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" ")));
    }
    check(ok, format!("I_eff per level: {}", detail.join("; ")))
}

/// DOF count of the first level whose goal error is within `accuracy`.
fn dofs_reaching(p: &ProblemDefinition<f64>, strategy: MarkingStrategy<f64>, accuracy: f64) -> Result<usize, String> {
    let mut hit = None;
    let options = AdaptOptions::new(1e-14, strategy, 2_000_000).with_max_levels(12);
    adapt_loop_with(p, p.goal.as_ref().unwrap(), &options, |level| {
        let error = (level.j_ref.unwrap() - level.j_h).abs();
        if hit.is_none() && error <= accuracy {
            hit = Some(level.u_h.space().dof_count());
            // stop the loop once the accuracy is reached
            return Err(dwr_core::Error::Usage("reached".into()));
        }
        Ok(())
    })
    .ok();
    hit.ok_or_else(|| format!("{strategy:?} never reached {accuracy:e}"))
}

fn adaptive_efficiency() -> Outcome {
    let p = problem("P1L");
    let adaptive = dofs_reaching(&p, MarkingStrategy::ErrorBalancing { theta: 1.0 }, 5e-4)?;
    let uniform = dofs_reaching(&p, MarkingStrategy::Uniform, 5e-4)?;
    let ratio = adaptive as f64 / uniform as f64;
    check(ratio <= 0.25, format!("adaptive {adaptive} DOFs, uniform {uniform} DOFs, ratio {ratio:.2} (required <= 0.25)"))
}

fn eigen_space(cells_per_side: usize) -> Arc<FeSpace<f64>> {
    let mut mesh = Mesh::create_rect_grid(4, 4, [0.0; 2], [1.0; 2]).unwrap();
    while mesh.n_active() < cells_per_side * cells_per_side {
        mesh = mesh.refine_uniform();
    }
    FeSpace::build(Arc::new(mesh), 1)
}

fn eigenvalue_estimator() -> Outcome {
    let ep = EigenProblem::from_definition(&problem("P4")).map_err(|e| e.to_string())?;
    let exact = 2.0 * PI * PI;
    let mut ok = true;
    let mut detail = Vec::new();
    for n in [8, 16, 32] {
        let space = eigen_space(n);
        let sol = solve_eigen_pair(&ep, &space).map_err(|e| e.to_string())?;
        let (ru, rz) = (patch_recover(&sol.u_h).map_err(|e| e.to_string())?, patch_recover(&sol.z_h).map_err(|e| e.to_string())?);
        let est = eigen_error_estimate(&ep, &sol, Some(&ru), Some(&rz)).map_err(|e| e.to_string())?;
        let i_eff = (exact - sol.lambda_h).abs() / est.signed_estimate.abs();
        ok &= sol.lambda_h >= exact && (0.5..=2.0).contains(&i_eff);
        detail.push(format!("h=1/{n}: λ_h {:.6}, I_eff {i_eff:.3}", sol.lambda_h));
        if n == 16 {
            let fine = Arc::new(space.mesh().refine_uniform().refine_uniform());
            let reference = solve_eigen_pair(&ep, &FeSpace::build(fine, 2)).map_err(|e| e.to_string())?;
            let cmp = compare_with_reference(&ep, &sol, &reference, reference.lambda_h).map_err(|e| e.to_string())?;
            let gap = reference.lambda_h - sol.lambda_h - cmp.estimate;
            ok &= (gap - cmp.remainder).abs() <= 0.2 * cmp.remainder.abs();
            detail.push(format!("gap {gap:.3e} vs remainder {:.3e}", cmp.remainder));
        }
    }
    check(ok, detail.join("; "))
}

fn control_estimator() -> Outcome {
    let p5 = problem("P5");
    let cp = ControlProblem::from_definition(&p5).map_err(|e| e.to_string())?;
    let mut mesh = p5.initial_mesh();
    let mut ok = true;
    let mut detail = Vec::new();
    for _ in 0..3 {
        let sol = solve_kkt(&cp, Arc::new(mesh.clone())).map_err(|e| e.to_string())?;
        let j = cost(&cp, &sol.u_h, &sol.q_h).map_err(|e| e.to_string())?;
        let reference = reference_cost(&cp, &mesh, 2).map_err(|e| e.to_string())?;
        let recovered = recover(&sol).map_err(|e| e.to_string())?;
        let before = linear_solve_count();
        let est = control_error_estimate(&cp, &sol, Some(&recovered)).map_err(|e| e.to_string())?;
        let solves = linear_solve_count() - before;
        let i_eff = (reference - j).abs() / est.estimate.signed_estimate.abs();
        ok &= solves == 0 && (0.5..=2.0).contains(&i_eff);
        detail.push(format!("{} cells: I_eff {i_eff:.3}, estimator solves {solves}", mesh.n_active()));
        mesh = mesh.refine_uniform();
    }
    check(ok, detail.join("; "))
}

fn unit(space: &Arc<FeSpace<f64>>, dof: usize) -> FeFunction<f64> {
    let mut c = vec![0.0; space.dof_count()];
    c[dof] = 1.0;
    FeFunction::from_coefficients(space.clone(), c)
}

fn galerkin_orthogonality() -> Result<bool, String> {
    let mut ok = true;
    for name in ["P1", "P2", "P3"] {
        let p = problem(name);
        let mesh = p.initial_mesh();
        let mesh = mesh.refine_with_closure(&BTreeSet::from([mesh.active_cells()[0]])).map_err(|e| e.to_string())?;
        let space = FeSpace::build(Arc::new(mesh), 1);
        let goal = p.goal.clone().unwrap().resolve(space.mesh()).map_err(|e| e.to_string())?;
        let u = solve_primal(&p, &space).map_err(|e| e.to_string())?;
        let z = solve_dual(&p, &goal, &u, &space).map_err(|e| e.to_string())?;
        let dirichlet = space.dofs_with_tags(&p.dirichlet_tags);
        for d in (0..space.dof_count()).filter(|d| !space.is_constrained(*d) && !dirichlet.contains(d)) {
            let psi = unit(&space, d);
            let r = weighted_primal_residual(&p, &u, &psi).map_err(|e| e.to_string())?;
            let rs = weighted_dual_residual(&p, &goal, &u, &z, &psi).map_err(|e| e.to_string())?;
            ok &= r.abs() <= 1e-10 && rs.abs() <= 1e-10;
        }
    }
    Ok(ok)
}

fn recovery_exactness() -> bool {
    let f = |x: [f64; 2]| x[0] * x[0] * x[1] - 2.0 * x[0] * x[1] * x[1] + x[1] * x[1] + 0.5;
    let mesh = Mesh::create_rect_grid(3, 3, [0.0; 2], [1.0; 2]).unwrap().refine_uniform();
    let u = FeFunction::nodal_interpolate(FeSpace::build(Arc::new(mesh), 1), f);
    let Ok(r) = patch_recover(&u) else { return false };
    (0..50).all(|k| {
        let x = [(k as f64 * 0.618_034).fract(), (k as f64 * 0.414_214 + 0.1).fract()];
        r.evaluate(x).is_ok_and(|v| (v - f(x)).abs() <= 1e-12)
    })
}

fn adapted_mesh() -> Result<Mesh<f64>, String> {
    let mut mesh = Mesh::create_lshape();
    for _ in 0..6 {
        // refine towards the re-entrant corner
        let (corner, _) = mesh.locate([-1e-3, 1e-3]).map_err(|e| e.to_string())?;
        mesh = mesh.refine_with_closure(&BTreeSet::from([corner])).map_err(|e| e.to_string())?;
    }
    Ok(mesh)
}

fn one_irregular(mesh: &Mesh<f64>) -> bool {
    mesh.active_cells().iter().all(|&c| {
        (0..4).all(|e| {
            let [a, b] = mesh.cell(c).edge(e);
            mesh.midpoint(a, b).is_none_or(|m| mesh.midpoint(a, m).is_none() && mesh.midpoint(m, b).is_none())
        })
    })
}

fn constraints_hold(mesh: Mesh<f64>) -> Result<bool, String> {
    let p = problem("P1L");
    let mesh = Arc::new(mesh);
    let hanging = mesh.hanging_vertices();
    let u = solve_primal(&p, &FeSpace::build(mesh.clone(), 1)).map_err(|e| e.to_string())?;
    let at = |v: usize| u.evaluate(mesh.vertex(v)).map_err(|e| e.to_string());
    let mut ok = !hanging.is_empty();
    for v in hanging {
        let (a, b) = mesh.split_edge_of(v).ok_or("hanging vertex without parent edge")?;
        ok &= (at(v)? - 0.5 * (at(a)? + at(b)?)).abs() <= 1e-12;
    }
    Ok(ok)
}

fn gradient_matches_finite_differences() -> Result<bool, String> {
    let cp = ControlProblem::from_definition(&problem("P5")).map_err(|e| e.to_string())?;
    let space = FeSpace::build(Arc::new(Mesh::create_rect_grid(8, 8, [0.0; 2], [1.0; 2]).unwrap()), 1);
    let sys = assemble_kkt(&cp, &space).map_err(|e| e.to_string())?;
    let control = |f: &dyn Fn([f64; 2]) -> f64| {
        let mut q = vec![0.0; space.dof_count()];
        for &d in &sys.control_dofs {
            q[d] = f(space.support_point(d));
        }
        FeFunction::from_coefficients(space.clone(), q)
    };
    let q = control(&|x| 1.0 + x[1]);
    let dq = control(&|x| (3.0 * x[1]).cos());
    let j = |q: &FeFunction<f64>| -> Result<f64, String> {
        let u = state_for_control(&cp, q).map_err(|e| e.to_string())?;
        cost(&cp, &u, q).map_err(|e| e.to_string())
    };
    let g = reduced_gradient(&cp, &q).map_err(|e| e.to_string())?;
    let directional: f64 = sys.control_dofs.iter().zip(&g).map(|(&d, gi)| gi * dq.coefficients()[d]).sum();
    let eps = 1e-6;
    let shifted = FeFunction::from_coefficients(
        space.clone(),
        q.coefficients().iter().zip(dq.coefficients()).map(|(a, b)| a + eps * b).collect(),
    );
    let fd = (j(&shifted)? - j(&q)?) / eps;
    Ok((fd - directional).abs() <= 1e-3 * directional.abs())
}

fn marking_scale_invariant() -> bool {
    let eta: Vec<f64> = (0..40).map(|k| ((k * 37 % 23) as f64 + 0.5) / 23.0).collect();
    let est = ErrorEstimate::from_signed((0..eta.len()).collect(), &eta, 0.0, None);
    [MarkingStrategy::ErrorBalancing { theta: 1.0 }, MarkingStrategy::FixedFraction { fraction: 0.3 }].into_iter().all(|s| {
        [1e-3, 7.0, 1e4].iter().all(|&c| mark_cells(&est, s).ok() == mark_cells(&est.scaled(c), s).ok())
    })
}

fn deterministic_csv() -> Result<bool, String> {
    let p = problem("P1");
    let options = AdaptOptions::new(1e-3, MarkingStrategy::ErrorBalancing { theta: 1.0 }, 50_000);
    let run = || adapt_loop(&p, p.goal.as_ref().unwrap(), &options).map(|t| t.to_csv()).map_err(|e| e.to_string());
    Ok(run()? == run()?)
}

fn invariant_suites() -> Outcome {
    let mesh = adapted_mesh()?;
    let results = [
        ("galerkin orthogonality", galerkin_orthogonality()?),
        ("recovery exactness", recovery_exactness()),
        ("one-irregularity", one_irregular(&mesh)),
        ("constraint consistency", constraints_hold(mesh)?),
        ("adjoint vs finite differences", gradient_matches_finite_differences()?),
        ("marking scale invariance", marking_scale_invariant()),
        ("csv determinism", deterministic_csv()?),
    ];
    let detail: Vec<String> = results.iter().map(|(name, ok)| format!("{name} {}", if *ok { "ok" } else { "broken" })).collect();
    check(results.iter().all(|(_, ok)| *ok), detail.join(", "))
}

fn main() -> ExitCode {
    let criteria: [(usize, &str, fn() -> Outcome); 8] = [
        (1, "table arithmetic", table_arithmetic),
        (2, "linear exactness", linear_exactness),
        (3, "abstract identity", abstract_identity),
        (4, "practical effectivity", practical_effectivity),
        (5, "adaptive efficiency", adaptive_efficiency),
        (6, "eigenvalue estimator", eigenvalue_estimator),
        (7, "control estimator", control_estimator),
        (8, "invariant suites", invariant_suites),
    ];
    let mut unexpected = 0;
    for (id, name, run) in criteria {
        let outcome = run();
        let known = KNOWN_FAILURES.contains(&id);
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        let note = if known { " [known failure]" } else { "" };
        println!("criterion {id} {name}: {status}{note} ({detail})");
        if outcome.is_ok() == known {
            unexpected += 1;
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria differ from the expected outcome");
        ExitCode::FAILURE
    }
}
