use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use dwr_core::dwr::{adapt_loop_with, mark_cells, AdaptOptions, ConvergenceRow, ConvergenceTable, ErrorEstimate, StopReason};
use dwr_core::eigen::{eigen_error_estimate, solve_eigen_pair, EigenProblem};
use dwr_core::fem::{patch_recover, FeFunction, FeSpace};
use dwr_core::mesh::Mesh;
use dwr_core::optctrl::{control_error_estimate, cost, recover, reference_cost, solve_kkt, ControlProblem};
use dwr_core::problems::{find, ProblemDefinition, ProblemKind, ReferenceRule};
use dwr_core::Error;

use crate::config::RunConfig;
use crate::vtk::write_vtk;
use crate::CliError;

pub const TABLE_FILE: &str = "table.csv";

#[derive(Debug)]
pub struct RunReport {
    pub table: ConvergenceTable<f64>,
    pub exit_code: u8,
}

/// 0 when the tolerance was reached, 1 on a solver failure, 2 when the DOF
/// or level budget ran out first.
pub fn exit_code(stop: Option<StopReason>) -> u8 {
    match stop {
        Some(StopReason::Tolerance) => 0,
        Some(StopReason::SolverFailure) | None => 1,
        Some(StopReason::MaxDofs | StopReason::MaxLevels) => 2,
    }
}

/// Runs the pipeline of the configured problem and writes `table.csv` (and
/// `level_<k>.vtk` files) into the output directory. The configuration is
/// validated before anything is solved or written.
pub fn run(config: &RunConfig) -> Result<RunReport, CliError> {
    config.validate()?;
    let problem: ProblemDefinition<f64> = find(&config.problem).ok_or_else(|| CliError::UnknownProblem(config.problem.clone()))?;
    std::fs::create_dir_all(&config.output_dir)?;
    let table = match problem.kind {
        ProblemKind::Stationary => stationary(&problem, config)?,
        ProblemKind::Eigen { .. } => eigen(&problem, config)?,
        ProblemKind::Control => control(&problem, config)?,
    };
    table.write_csv(config.output_dir.join(TABLE_FILE))?;
    Ok(RunReport { exit_code: exit_code(table.stop), table })
}

fn vtk_path(dir: &Path, level: usize) -> std::path::PathBuf {
    dir.join(format!("level_{level}.vtk"))
}

fn stationary(problem: &ProblemDefinition<f64>, config: &RunConfig) -> Result<ConvergenceTable<f64>, CliError> {
    let goal = problem.goal.clone().ok_or_else(|| CliError::Usage(format!("{} has no goal functional", problem.name)))?;
    let options = AdaptOptions {
        estimator: config.estimator.into(),
        record_wall_time: config.record_wall_time,
        ..AdaptOptions::new(config.tol, config.strategy.marking(), config.max_dofs).with_max_levels(config.max_levels)
    };
    let mut io_error = None;
    let result = adapt_loop_with(problem, &goal, &options, |level| {
        if config.emit_vtk {
            let fields = [("u_h", level.u_h), ("z_h", level.z_h)];
            let path = vtk_path(&config.output_dir, level.level);
            if let Err(e) = write_vtk(path, level.u_h.mesh(), &fields, Some(&level.estimate.eta_cells)) {
                io_error = Some(e);
                return Err(Error::Data("writing the level file failed".into()));
            }
        }
        Ok(())
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    Ok(result?)
}

/// What one level of a custom pipeline hands back to the loop.
struct Level {
    n_dofs: usize,
    j_h: f64,
    j_ref: Option<f64>,
    estimate: ErrorEstimate<f64>,
    fields: Vec<(&'static str, FeFunction<f64>)>,
}

/// The adaptation loop for pipelines without a goal functional: solve and
/// estimate through `step`, then stop, mark and refine as the stationary loop does.
fn custom_loop(
    config: &RunConfig,
    initial: Mesh<f64>,
    mut step: impl FnMut(&Arc<Mesh<f64>>) -> dwr_core::Result<Level>,
) -> Result<ConvergenceTable<f64>, CliError> {
    let mut table = ConvergenceTable::default();
    let mut mesh = Arc::new(initial);
    for level in 0..config.max_levels {
        let start = Instant::now();
        let out = match step(&mesh) {
            Ok(out) => out,
            Err(e @ (Error::NotConverged { .. } | Error::ShiftRejected(_) | Error::Normalization(_))) => {
                table.stop = Some(StopReason::SolverFailure);
                table.error = Some(e.to_string());
                return Ok(table);
            }
            Err(e) => return Err(e.into()),
        };
        let est = &out.estimate;
        let i_eff = out
            .j_ref
            .filter(|_| est.signed_estimate != 0.0)
            .map(|r| (r - out.j_h).abs() / est.signed_estimate.abs());
        if config.emit_vtk {
            let fields: Vec<(&str, &FeFunction<f64>)> = out.fields.iter().map(|(n, f)| (*n, f)).collect();
            write_vtk(vtk_path(&config.output_dir, level), &mesh, &fields, Some(&est.eta_cells))?;
        }
        table.rows.push(ConvergenceRow {
            level,
            n_dofs: out.n_dofs,
            n_cells: mesh.n_active(),
            j_h: out.j_h,
            eta: est.eta_global,
            signed_estimate: est.signed_estimate,
            i_eff,
            wall_time_s: if config.record_wall_time { start.elapsed().as_secs_f64() } else { 0.0 },
        });
        if est.eta_global <= config.tol {
            table.stop = Some(StopReason::Tolerance);
            return Ok(table);
        }
        if out.n_dofs > config.max_dofs {
            table.stop = Some(StopReason::MaxDofs);
            return Ok(table);
        }
        if level + 1 == config.max_levels {
            break;
        }
        let mut marked = mark_cells(est, config.strategy.marking())?;
        if marked.is_empty() {
            marked = mesh.active_cells().iter().copied().collect::<BTreeSet<_>>();
        }
        mesh = Arc::new(mesh.refine_with_closure(&marked)?);
    }
    table.stop = Some(StopReason::MaxLevels);
    Ok(table)
}

fn eigen(problem: &ProblemDefinition<f64>, config: &RunConfig) -> Result<ConvergenceTable<f64>, CliError> {
    let ep = EigenProblem::from_definition(problem)?;
    let exact = match problem.reference {
        Some(ReferenceRule::Exact(v)) => Some(v),
        _ => None,
    };
    custom_loop(config, problem.initial_mesh(), |mesh| {
        let space = FeSpace::build(mesh.clone(), 1);
        let sol = solve_eigen_pair(&ep, &space)?;
        let (ru, rz) = (patch_recover(&sol.u_h)?, patch_recover(&sol.z_h)?);
        let estimate = eigen_error_estimate(&ep, &sol, Some(&ru), Some(&rz))?;
        Ok(Level {
            n_dofs: space.dof_count(),
            j_h: sol.lambda_h,
            j_ref: exact,
            estimate,
            fields: vec![("u_h", sol.u_h), ("z_h", sol.z_h)],
        })
    })
}

fn control(problem: &ProblemDefinition<f64>, config: &RunConfig) -> Result<ConvergenceTable<f64>, CliError> {
    let cp = ControlProblem::from_definition(problem)?;
    custom_loop(config, problem.initial_mesh(), |mesh| {
        let sol = solve_kkt(&cp, mesh.clone())?;
        let j_h = cost(&cp, &sol.u_h, &sol.q_h)?;
        let j_ref = match problem.reference {
            Some(ReferenceRule::Exact(v)) => Some(v),
            Some(ReferenceRule::FineMesh { refinements }) => Some(reference_cost(&cp, mesh, refinements)?),
            _ => None,
        };
        let estimate = control_error_estimate(&cp, &sol, Some(&recover(&sol)?))?.estimate;
        Ok(Level {
            n_dofs: sol.u_h.space().dof_count(),
            j_h,
            j_ref,
            estimate,
            fields: vec![("u_h", sol.u_h), ("q_h", sol.q_h), ("z_h", sol.z_h)],
        })
    })
}
