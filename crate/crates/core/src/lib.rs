//! Two-scale finite element method for Isaacs equations.
//!
//! The fully nonlinear operator `inf_a sup_b A^{ab} : D^2 u` is split into a
//! Laplacian part `(lambda/2) Delta` and an integro-differential remainder
//! whose kernel is sampled with a positive cubature rule. The result is a
//! monotone P1 scheme on weakly acute meshes, solved by a Howard-type min-max
//! policy iteration.

pub mod abp;
pub mod error;
pub mod fem;
pub mod harness;
pub mod functions;
pub mod kernel;
pub mod mesh;
pub mod nonlocal;
pub mod problem;
pub mod solver;
pub mod sparse;
pub mod sym2;

pub use error::{Error, Result};
