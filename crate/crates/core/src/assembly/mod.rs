//! Per-mode Galerkin assembly: radial meshes, bases, bilinear forms and the
//! trace-coupled first-order system.

mod basis;
mod forms;
mod mesh;
mod quadrature;
mod sparse;
mod system;

pub use basis::{RadialBasis, ShapeJet};
pub use forms::{assemble_grad_form, assemble_mass, assemble_plate_form, polar_hoop, polar_laplacian, polar_twist};
pub use mesh::{build_radial_mesh, Domain, ElementKind, RadialMesh, DEFAULT_QUADRATURE_POINTS};
pub use quadrature::GaussLegendre;
pub use sparse::{to_triplet_text, CsrMatrix};
pub use system::{assemble_mode_system, ConstrainedForms, Discretization, ModeSystem, StateVector, Whitening};
