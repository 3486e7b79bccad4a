//! Low-rank gradient updates on the unitary/orthogonal manifold.
//!
//! An `n x n` parameter constrained to be unitary (complex) or orthogonal
//! (real) can be trained with rank-`k` gradient steps in `O(k n^2)` time,
//! either by polar projection of the perturbed matrix back onto the
//! manifold (the direct mode) or by transporting the parameter along the
//! geodesic of the tangent-projected gradient (the tangent mode). Both
//! fast paths run entirely in a subspace of dimension at most `2k` and are
//! verified against exact dense oracles at desk scale.
//!
//! The crate is organized as:
//!
//! - [`numerics`]: dense matrices over either field, Gram-Schmidt, a small
//!   Hermitian eigensolver, SVD/polar/expm oracles.
//! - [`lowrank`]: factored low-rank matrices and the randomized samplers
//!   that compress approximately-low-rank gradients to explicit rank `k`.
//! - [`manifold`]: the rank-`k` direct and tangent updates, initialization
//!   schemes, drift control and parameter (de)serialization.
//! - [`rnn`]: a minimal unitary RNN with hand-derived backpropagation
//!   through time plus the adding, copy-memory and random-unitary tasks.
//! - [`uconv`]: unitary/orthogonal convolution parameterized per frequency
//!   in the Fourier domain, verified against a brute-force cyclic oracle.
//! - [`trainer`]: RMSprop with split learning rates, the training loop,
//!   the runtime-scaling benchmark and the self-check suite backing the
//!   `projunn` CLI.
//!
//! See the crate examples for one runnable program per capability.

pub mod error;
pub mod lowrank;
pub mod manifold;
pub mod numerics;
pub mod rnn;
pub mod trainer;
pub mod uconv;

pub use error::{Error, Result};
