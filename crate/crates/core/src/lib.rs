//! Structure-preserving algebraic multigrid for the stationary distribution
//! of Kronecker-structured continuous-time Markov chains.
//!
//! Operators are kept as sums of Kronecker products on every grid level and
//! iterates live in truncated Tensor-Train format.

pub mod config;
pub mod error;
pub mod harness;
pub mod hierarchy;
pub mod kron;
pub mod linalg;
pub mod models;
pub mod solver;
pub mod tt;

pub use error::{Error, Result};
