use thiserror::Error;

use crate::linalg::SolverReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("solver did not converge: {context} ({report})")]
    NotConverged { context: String, report: SolverReport },
    #[error("shift {0} rejected: shifted system is near-singular")]
    ShiftRejected(f64),
    #[error("unsupported spectrum: {0}")]
    UnsupportedSpectrum(String),
    #[error("normalization failed: {0}")]
    Normalization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
