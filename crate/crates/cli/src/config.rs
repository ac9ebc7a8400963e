use std::path::PathBuf;
use std::str::FromStr;

use dwr_core::dwr::{EstimatorForm, MarkingStrategy};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    ErrorBalancing {
        #[serde(default = "one")]
        theta: f64,
    },
    FixedFraction {
        fraction: f64,
    },
    Uniform,
    Adhoc,
}

fn one() -> f64 {
    1.0
}

impl Strategy {
    pub fn marking(self) -> MarkingStrategy<f64> {
        match self {
            Strategy::ErrorBalancing { theta } => MarkingStrategy::ErrorBalancing { theta },
            Strategy::FixedFraction { fraction } => MarkingStrategy::FixedFraction { fraction },
            Strategy::Uniform => MarkingStrategy::Uniform,
            Strategy::Adhoc => MarkingStrategy::AdhocGradientJump,
        }
    }
}

/// `dwr`, `error_balancing[:θ]`, `fixed_fraction:f`, `uniform` or `adhoc`.
impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a.parse::<f64>().map_err(|e| format!("bad strategy parameter {a:?}: {e}"))?)),
            None => (s, None),
        };
        match (name, arg) {
            ("dwr" | "error_balancing", theta) => Ok(Strategy::ErrorBalancing { theta: theta.unwrap_or(1.0) }),
            ("fixed_fraction", Some(fraction)) => Ok(Strategy::FixedFraction { fraction }),
            ("fixed_fraction", None) => Err("fixed_fraction needs a fraction, e.g. fixed_fraction:0.2".into()),
            ("uniform", None) => Ok(Strategy::Uniform),
            ("adhoc", None) => Ok(Strategy::Adhoc),
            _ => Err(format!("unknown strategy {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    Primal,
    Symmetric,
}

impl From<Estimator> for EstimatorForm {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::Primal => EstimatorForm::PrimalOnly,
            Estimator::Symmetric => EstimatorForm::Symmetric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub strategy: Strategy,
    pub tol: f64,
    pub max_dofs: usize,
    pub max_levels: usize,
    pub estimator: Estimator,
    pub output_dir: PathBuf,
    pub emit_vtk: bool,
    /// Record per-level wall time; otherwise the column is zero and the
    /// table is reproducible byte for byte.
    pub record_wall_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: "P1".into(),
            strategy: Strategy::ErrorBalancing { theta: 1.0 },
            tol: 1e-3,
            max_dofs: 100_000,
            max_levels: 40,
            estimator: Estimator::Primal,
            output_dir: PathBuf::from("out"),
            emit_vtk: false,
            record_wall_time: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<(), CliError> {
        if !dwr_core::problems::problem_names().contains(&self.problem.as_str()) {
            return Err(CliError::UnknownProblem(self.problem.clone()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Usage(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_levels == 0 {
            return Err(CliError::Usage("max_levels must be at least 1".into()));
        }
        self.strategy.marking().validate().map_err(|e| CliError::Usage(e.to_string()))
    }
}
