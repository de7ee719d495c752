//! Sparse storage, kernels and direct solvers.

mod csr;
pub mod factor;
pub mod ordering;

pub use csr::{CsrMatrix, TripletBuilder};
pub use factor::{
    factorize, factorize_with, FactorKind, FactorOptions, Factorization, FillOrdering,
};
pub use ordering::reverse_cuthill_mckee;
