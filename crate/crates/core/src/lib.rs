//! Nonlocal interface energies in periodic media on lattices: periodic cell
//! problem, planelike level-set minimizers, and stable norm estimates.

pub mod acceptance;
pub mod cellsolver;
pub mod cli;
mod circulation;
pub mod config;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod lattice;
mod maxflow;
pub mod plateau;
pub mod profile;
pub mod quad;
pub mod set;
pub mod stablenorm;
pub mod sum;

pub use error::{Error, Result};
pub use kernel::{Dim, KernelSpec};
