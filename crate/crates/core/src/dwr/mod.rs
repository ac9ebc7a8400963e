//! Dual weighted residual estimation, marking and the adaptation loop.

mod adapt;
mod identity;
pub mod residual;
pub mod solve;
mod table;

use std::collections::BTreeSet;
use std::sync::Arc;

pub use adapt::{adapt_loop, adapt_loop_with, verification_estimate, AdaptOptions, EstimatorForm, LevelState};
pub use identity::{abstract_error_identity, trapezoid_kernel_check, AbstractFunctional, IdentityEvaluation};
pub use residual::ResidualData;
pub use table::{format_sci, ConvergenceRow, ConvergenceTable, StopReason, CSV_HEADER};

use crate::error::{Error, Result};
use crate::fem::recovery::recovery_weight;
use crate::fem::FeFunction;
use crate::problems::{GoalFunctional, ProblemDefinition};
use crate::{Point, Real};

/// Cell indicators and global quantities of one estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEstimate<T> {
    /// Active cell ids, in the order of `eta_cells`.
    pub cells: Vec<usize>,
    /// `η_K = |signed contribution of K|`.
    pub eta_cells: Vec<T>,
    /// `η_ω = Σ η_K`.
    pub eta_global: T,
    /// Sum of the signed cell contributions.
    pub signed_estimate: T,
    pub effectivity: Option<T>,
    /// Half the weighted primal residual.
    pub primal_part: T,
    /// Half the weighted dual residual, when the primal recovery was given.
    pub dual_part: Option<T>,
    /// Boundary-data part `−∫_{Γ_D} (g − u_h) ν∂ₙz ds`, included in the cell
    /// contributions and the signed estimate.
    pub boundary_data_part: T,
    /// Normal-derivative jumps of `u_h` per cell, used by ad hoc marking.
    pub gradient_jumps: Vec<T>,
}

impl<T: Real> ErrorEstimate<T> {
    /// Builds an estimate from signed per-cell contributions.
    pub fn from_signed(cells: Vec<usize>, signed: &[T], primal_part: T, dual_part: Option<T>) -> Self {
        let eta_cells: Vec<T> = signed.iter().map(|v| v.abs()).collect();
        Self {
            cells,
            eta_global: eta_cells.iter().copied().sum(),
            eta_cells,
            signed_estimate: signed.iter().copied().sum(),
            effectivity: None,
            primal_part,
            dual_part,
            boundary_data_part: T::zero(),
            gradient_jumps: Vec::new(),
        }
    }

    pub fn scaled(&self, c: T) -> Self {
        let mut e = self.clone();
        e.eta_cells.iter_mut().for_each(|v| *v *= c);
        e.eta_global *= c;
        e.signed_estimate *= c;
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkingStrategy<T> {
    /// Cells with `η_K > θ·η_ω/N`.
    ErrorBalancing { theta: T },
    /// The `⌈f·N⌉` cells of largest `η_K`.
    FixedFraction { fraction: T },
    Uniform,
    /// Top 30 % by normal-derivative jump of `u_h`.
    AdhocGradientJump,
}

impl<T: Real> Default for MarkingStrategy<T> {
    fn default() -> Self {
        MarkingStrategy::ErrorBalancing { theta: T::one() }
    }
}

impl<T: Real> MarkingStrategy<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            MarkingStrategy::ErrorBalancing { theta } if !(theta > T::zero()) => {
                Err(Error::Domain("error balancing needs theta > 0".into()))
            }
            MarkingStrategy::FixedFraction { fraction } if !(fraction > T::zero() && fraction <= T::one()) => {
                Err(Error::Domain("fixed fraction needs 0 < f <= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

const ADHOC_FRACTION: f64 = 0.3;

fn top_fraction<T: Real>(cells: &[usize], values: &[T], fraction: T) -> BTreeSet<usize> {
    let n = cells.len();
    let count = (fraction * T::from_count(n)).ceil().to_usize().unwrap_or(n).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    // descending by value, ties by ascending cell id
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(std::cmp::Ordering::Equal).then(cells[a].cmp(&cells[b])));
    order.into_iter().take(count).map(|i| cells[i]).collect()
}

pub fn mark_cells<T: Real>(estimate: &ErrorEstimate<T>, strategy: MarkingStrategy<T>) -> Result<BTreeSet<usize>> {
    strategy.validate()?;
    if estimate.cells.is_empty() {
        return Err(Error::Usage("cannot mark from an empty estimate".into()));
    }
    let n = T::from_count(estimate.cells.len());
    Ok(match strategy {
        MarkingStrategy::ErrorBalancing { theta } => {
            let eta_global: T = estimate.eta_cells.iter().copied().sum();
            let threshold = theta * eta_global / n;
            estimate.cells.iter().zip(&estimate.eta_cells).filter(|(_, &e)| e > threshold).map(|(&c, _)| c).collect()
        }
        MarkingStrategy::FixedFraction { fraction } => top_fraction(&estimate.cells, &estimate.eta_cells, fraction),
        MarkingStrategy::Uniform => estimate.cells.iter().copied().collect(),
        MarkingStrategy::AdhocGradientJump => {
            if estimate.gradient_jumps.len() != estimate.cells.len() {
                return Err(Error::Usage("estimate carries no gradient jumps".into()));
            }
            top_fraction(&estimate.cells, &estimate.gradient_jumps, T::lit(ADHOC_FRACTION))
        }
    })
}

/// `I_eff = |J_ref − J_h| / η`.
pub fn effectivity_index<T: Real>(j_ref: T, j_h: T, eta: T) -> Result<T> {
    if !(eta > T::zero()) {
        return Err(Error::Domain("effectivity needs a positive estimate".into()));
    }
    Ok((j_ref - j_h).abs() / eta)
}

/// Residual data of a problem's primal equation.
pub fn primal_data<T: Real>(problem: &ProblemDefinition<T>) -> (Arc<dyn Fn(usize, Point<T>, Point<T>) -> T + '_>, &[u8]) {
    let f = problem.source.clone();
    (Arc::new(move |_, _, x| f(x)), &problem.dirichlet_tags)
}

/// `ρ(u_h)(w) = (f, w) − a(u_h)(w)`.
pub fn weighted_primal_residual<T: Real>(
    problem: &ProblemDefinition<T>,
    u_h: &FeFunction<T>,
    weight: &FeFunction<T>,
) -> Result<T> {
    let (density, tags) = primal_data(problem);
    let data = ResidualData { density: Some(&*density), ..ResidualData::new(&problem.form, tags) };
    residual::weak_primal(&data, u_h, weight)
}

/// `ρ*(z_h)(w) = J′(w) − a′(u_h)(w, z_h)`.
pub fn weighted_dual_residual<T: Real>(
    problem: &ProblemDefinition<T>,
    goal: &GoalFunctional<T>,
    u_h: &FeFunction<T>,
    z_h: &FeFunction<T>,
    weight: &FeFunction<T>,
) -> Result<T> {
    let samples = goal.samples(weight.mesh())?;
    let data = ResidualData { samples: &samples, ..ResidualData::new(&problem.form, &problem.dirichlet_tags) };
    residual::weak_adjoint(&data, u_h, z_h, weight)
}

/// Cell indicators from the strong-form residuals weighted with
/// `recovered_z − z_h`; with `recovered_u`, the dual residual weighted with
/// `recovered_u − u_h` enters as well and both halves get factor ½.
pub fn localize_indicators<T: Real>(
    problem: &ProblemDefinition<T>,
    goal: &GoalFunctional<T>,
    u_h: &FeFunction<T>,
    z_h: &FeFunction<T>,
    recovered_z: Option<&FeFunction<T>>,
    recovered_u: Option<&FeFunction<T>>,
) -> Result<ErrorEstimate<T>> {
    let recovered_z = recovered_z.ok_or_else(|| Error::Usage("localization needs the recovered dual".into()))?;
    let tags = &problem.dirichlet_tags;
    let w_z = recovery_weight(z_h, recovered_z, tags)?;
    let (density, _) = primal_data(problem);
    let data = ResidualData { density: Some(&*density), ..ResidualData::new(&problem.form, tags) };
    let primal = residual::localize_primal(&data, u_h, &w_z)?;
    let primal_sum: T = primal.iter().copied().sum();
    let boundary =
        residual::dirichlet_data_terms(&problem.form, &*problem.dirichlet_value, tags, u_h, recovered_z)?;
    let mut estimate = match recovered_u {
        None => {
            let signed: Vec<T> = primal.iter().zip(&boundary).map(|(&p, &b)| p + b).collect();
            ErrorEstimate::from_signed(u_h.mesh().active_cells().to_vec(), &signed, T::half() * primal_sum, None)
        }
        Some(ru) => {
            let w_u = recovery_weight(u_h, ru, tags)?;
            let samples = goal.samples(u_h.mesh())?;
            let dual_data = ResidualData { samples: &samples, ..ResidualData::new(&problem.form, tags) };
            let dual = residual::localize_adjoint(&dual_data, u_h, z_h, &w_u)?;
            let dual_sum: T = dual.iter().copied().sum();
            let signed: Vec<T> =
                primal.iter().zip(&dual).zip(&boundary).map(|((&p, &d), &b)| T::half() * (p + d) + b).collect();
            ErrorEstimate::from_signed(
                u_h.mesh().active_cells().to_vec(),
                &signed,
                T::half() * primal_sum,
                Some(T::half() * dual_sum),
            )
        }
    };
    estimate.boundary_data_part = boundary.iter().copied().sum();
    estimate.gradient_jumps = residual::gradient_jumps(u_h, tags);
    Ok(estimate)
}
