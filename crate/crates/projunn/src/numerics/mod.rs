//! Field-generic dense linear algebra primitives and the exact dense
//! oracles against which every fast-path algorithm in this crate is tested.
//!
//! Everything here is a pure function on immutable inputs and safe to call
//! from any number of workers. Tolerances are relative to the input
//! Frobenius norm unless the input is near zero (absolute floor 1e-14).

mod eig;
mod entry;
mod linalg;
mod matrix;
mod orth;

pub use eig::{herm_eig_small, EigPair};
pub use entry::{Entry, Field};
pub use linalg::{expm_dense, polar_project_dense, svd, unitarity_error, Svd};
pub use matrix::{dot, vec_norm, DenseMatrix};
pub use orth::{gram_schmidt, gram_schmidt_cols, GS_DEFAULT_TOL};
