//! Batch driver for adaptive runs: JSON configuration, the per-problem
//! pipelines, `table.csv` and legacy VTK output.

mod config;
mod run;
mod vtk;

pub use config::{Estimator, RunConfig, Strategy};
pub use run::{exit_code, run, RunReport, TABLE_FILE};
pub use vtk::{vtk_string, write_vtk};

/// Exit status for command-line usage errors (BSD `EX_USAGE`).
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown problem {0:?}; available problems: {}", dwr_core::problems::problem_names().join(", "))]
    UnknownProblem(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] dwr_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::UnknownProblem(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(dwr_core::Error::Usage(_) | dwr_core::Error::Domain(_)) => EXIT_USAGE,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}
