//! Goal-oriented adaptive finite elements driven by dual weighted residuals.
//!
//! The crate solves scalar model problems on hierarchical quadrilateral
//! meshes, estimates the error in an output functional by weighting the
//! residuals of the discrete primal and dual solutions, and refines the mesh
//! where the weighted residuals are large.
//!
//! All numerics are generic over [`Real`]; the `f64` aliases below cover the
//! common case.

// `!(x > 0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dwr;
pub mod eigen;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod optctrl;
pub mod problems;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Point, Real};

pub type Mesh = mesh::Mesh<f64>;
pub type FeSpace = fem::FeSpace<f64>;
pub type FeFunction = fem::FeFunction<f64>;
pub type SparseMatrix = linalg::SparseMatrix<f64>;
pub type ErrorEstimate = dwr::ErrorEstimate<f64>;
pub type ConvergenceTable = dwr::ConvergenceTable<f64>;
pub type ProblemDefinition = problems::ProblemDefinition<f64>;
pub type GoalFunctional = problems::GoalFunctional<f64>;
pub type ControlProblem = optctrl::ControlProblem<f64>;
pub type EigenSolution = eigen::EigenSolution<f64>;

pub type Mesh32 = mesh::Mesh<f32>;
pub type SparseMatrix32 = linalg::SparseMatrix<f32>;
