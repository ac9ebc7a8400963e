//! Lagrange spaces on hanging-node meshes, assembly and weight recovery.

pub mod assembly;
pub mod element;
pub mod function;
pub mod quadrature;
pub mod recovery;
pub mod space;

pub use assembly::{
    apply_dirichlet, assemble_adjoint_operator, assemble_boundary_load, assemble_form_residual, assemble_functional,
    assemble_load, assemble_operator, FormDescriptor, FormTerm,
};
pub use function::{physical_basis, FeFunction, PhysicalBasis, Sample};
pub use recovery::patch_recover;
pub use space::FeSpace;
