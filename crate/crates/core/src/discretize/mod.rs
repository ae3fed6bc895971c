//! Tensor-product finite elements on the straightened domain, band storage and the eigensolver.

pub mod assemble;
pub mod banded;
pub mod cache;
pub mod eigen;
pub mod grid;
pub mod norms;

pub use assemble::{assemble_forms, assemble_with, AssembledForms, DofMap};
pub use banded::{Ldlt, SymBand};
pub use cache::{CacheHeader, CachedPair, EigenCache};
pub use eigen::{solve_eigenpairs, EigenPair, SolverOptions, Spectrum, Window};
pub use grid::{FormSums, Region, Snapped, TensorGrid};
pub use norms::{refinement_shifts, restrict_norm, wing_norm};
