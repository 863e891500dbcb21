//! Tensor-Train vectors and matrices.
//!
//! A `J`-way tensor is stored as a chain of cores `G_k` of shape
//! `(r_{k-1}, n_k, r_k)` with `r_0 = r_J = 1`, so that each entry is the
//! matrix product `G_1(i_1) G_2(i_2) ... G_J(i_J)`.
//!
//! Linearization follows the Kronecker convention throughout the crate: the
//! first mode varies slowest, so the vector of an elementary tensor
//! `u_1 ⊗ ... ⊗ u_J` is the Kronecker product of its factors.

mod core;
mod matrix;
mod policy;
mod vector;

pub use self::core::Core;
pub use matrix::TtMatrix;
pub use policy::TruncationPolicy;
pub use vector::{effective_rank, TtVector, DEFAULT_FULL_LIMIT};

#[cfg(test)]
mod tests;
