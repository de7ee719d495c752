//! Saddle point solvers and preconditioners for Neumann boundary control of
//! the Poisson equation on the unit square.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the harness uses.

pub mod assembly;
pub mod dense;
pub mod error;
pub mod harness;
pub mod io;
pub mod krylov;
pub mod mesh;
pub mod precond;
pub mod scalar;
pub mod sparse;
pub mod spectral;
pub mod systems;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Csr = sparse::CsrMatrix<f64>;
pub type Dense = dense::DenseMatrix<f64>;
pub type Mesh = mesh::TriMesh<f64>;
pub type Problem = assembly::ProblemInstance<f64>;
pub type Operators = assembly::FemOperators<f64>;
pub type Blocks = systems::ExtendedBlocks<f64>;
pub type System = systems::BlockSystem<f64>;
pub type Solution = systems::PhysicalSolution<f64>;
pub type Precond = precond::Preconditioner<f64>;
