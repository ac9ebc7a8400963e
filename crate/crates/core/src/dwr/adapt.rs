use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use super::residual::{self, ResidualData};
use super::solve::{solve_dual, solve_primal};
use super::table::{ConvergenceRow, ConvergenceTable, StopReason};
use super::{localize_indicators, mark_cells, primal_data, ErrorEstimate, MarkingStrategy};
use crate::error::{Error, Result};
use crate::fem::{patch_recover, FeFunction, FeSpace};
use crate::mesh::Mesh;
use crate::problems::{GoalFunctional, ProblemDefinition};
use crate::Real;

/// Which halves of the error identity enter the indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorForm {
    #[default]
    PrimalOnly,
    /// Primal and dual residuals, each with factor ½.
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptOptions<T> {
    pub tol: T,
    pub strategy: MarkingStrategy<T>,
    pub max_dofs: usize,
    pub max_levels: usize,
    pub estimator: EstimatorForm,
    /// Record wall time per level; off by default so tables are reproducible.
    pub record_wall_time: bool,
}

impl<T: Real> AdaptOptions<T> {
    pub fn new(tol: T, strategy: MarkingStrategy<T>, max_dofs: usize) -> Self {
        Self { tol, strategy, max_dofs, max_levels: 40, estimator: EstimatorForm::PrimalOnly, record_wall_time: false }
    }

    pub fn with_max_levels(mut self, levels: usize) -> Self {
        self.max_levels = levels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::Domain(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_levels == 0 {
            return Err(Error::Domain("at least one level is required".into()));
        }
        self.strategy.validate()
    }
}

/// Everything computed on one level, handed to the per-level callback.
pub struct LevelState<'a, T> {
    pub level: usize,
    pub goal: &'a GoalFunctional<T>,
    pub u_h: &'a FeFunction<T>,
    pub z_h: &'a FeFunction<T>,
    pub estimate: &'a ErrorEstimate<T>,
    pub j_h: T,
    pub j_ref: Option<T>,
}

pub fn adapt_loop<T: Real>(
    problem: &ProblemDefinition<T>,
    goal: &GoalFunctional<T>,
    options: &AdaptOptions<T>,
) -> Result<ConvergenceTable<T>> {
    adapt_loop_with(problem, goal, options, |_| Ok(()))
}

/// The adaptation loop, starting from the problem's initial mesh.
///
/// Invalid options are rejected before any solve. A failing solve ends the
/// loop with the rows computed so far and the message in `error`.
pub fn adapt_loop_with<T: Real>(
    problem: &ProblemDefinition<T>,
    goal: &GoalFunctional<T>,
    options: &AdaptOptions<T>,
    mut on_level: impl FnMut(&LevelState<'_, T>) -> Result<()>,
) -> Result<ConvergenceTable<T>> {
    options.validate()?;
    let mut table = ConvergenceTable::default();
    let mut mesh = Arc::new(problem.initial_mesh());
    for level in 0..options.max_levels {
        let start = Instant::now();
        let resolved = goal.resolve(&mesh)?;
        let space = FeSpace::build(mesh.clone(), 1);
        let solved = solve_primal(problem, &space).and_then(|u| {
            let z = solve_dual(problem, &resolved, &u, &space)?;
            Ok((u, z))
        });
        let (u_h, z_h) = match solved {
            Ok(pair) => pair,
            Err(e @ Error::NotConverged { .. }) => {
                table.stop = Some(StopReason::SolverFailure);
                table.error = Some(e.to_string());
                return Ok(table);
            }
            Err(e) => return Err(e),
        };
        let recovered_z = patch_recover(&z_h)?;
        let recovered_u = match options.estimator {
            EstimatorForm::PrimalOnly => None,
            EstimatorForm::Symmetric => Some(patch_recover(&u_h)?),
        };
        let mut estimate =
            localize_indicators(problem, &resolved, &u_h, &z_h, Some(&recovered_z), recovered_u.as_ref())?;
        let j_h = resolved.evaluate(&u_h)?;
        let j_ref = problem.reference_value(&mesh)?;
        let i_eff = j_ref
            .filter(|_| estimate.signed_estimate != T::zero())
            .map(|r| (r - j_h).abs() / estimate.signed_estimate.abs());
        estimate.effectivity = i_eff;
        on_level(&LevelState { level, goal: &resolved, u_h: &u_h, z_h: &z_h, estimate: &estimate, j_h, j_ref })?;
        table.rows.push(ConvergenceRow {
            level,
            n_dofs: space.dof_count(),
            n_cells: mesh.n_active(),
            j_h,
            eta: estimate.eta_global,
            signed_estimate: estimate.signed_estimate,
            i_eff,
            wall_time_s: if options.record_wall_time { start.elapsed().as_secs_f64() } else { 0.0 },
        });
        if estimate.eta_global <= options.tol {
            table.stop = Some(StopReason::Tolerance);
            return Ok(table);
        }
        if space.dof_count() > options.max_dofs {
            table.stop = Some(StopReason::MaxDofs);
            return Ok(table);
        }
        if level + 1 == options.max_levels {
            break;
        }
        let mut marked = mark_cells(&estimate, options.strategy)?;
        if marked.is_empty() {
            // perfectly balanced indicators: nothing exceeds the mean
            marked = mesh.active_cells().iter().copied().collect::<BTreeSet<_>>();
        }
        mesh = Arc::new(mesh.refine_with_closure(&marked)?);
    }
    table.stop = Some(StopReason::MaxLevels);
    Ok(table)
}

/// Signed estimate `ρ(u_h)(z − I_h z)` with the dual solved in Q2 on a mesh
/// refined `refinements` times uniformly, in place of recovery.
pub fn verification_estimate<T: Real>(
    problem: &ProblemDefinition<T>,
    goal: &GoalFunctional<T>,
    u_h: &FeFunction<T>,
    refinements: usize,
) -> Result<T> {
    let coarse = u_h.mesh();
    let goal = goal.resolve(coarse)?;
    let fine: Mesh<T> = (0..refinements).fold((**coarse).clone(), |m, _| m.refine_uniform());
    let fine_space = FeSpace::build(Arc::new(fine), 2);
    let u_fine = u_h.interpolate_into(&fine_space)?;
    let z_fine = solve_dual(problem, &goal, &u_fine, &fine_space)?;
    let lifted = z_fine.interpolate_into(u_h.space())?.interpolate_into(&fine_space)?;
    let weight = z_fine.difference(&lifted)?;
    let (density, tags) = primal_data(problem);
    let data = ResidualData { density: Some(&*density), ..ResidualData::new(&problem.form, tags) };
    let boundary = residual::dirichlet_data_terms(&problem.form, &*problem.dirichlet_value, tags, &u_fine, &z_fine)?;
    Ok(residual::weak_primal(&data, &u_fine, &weight)? + boundary.into_iter().sum::<T>())
}
