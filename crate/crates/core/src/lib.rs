//! Computational laboratory for discrete spherical averages: exponential sums,
//! Farey dissection, lattice spheres, symbol decomposition, exponent regions,
//! maximal-function experiments and sparse stopping decompositions.

pub mod arithmetic;
pub mod error;
pub mod farey;
pub mod lattice;
pub mod maximal_lab;
pub mod moment_lab;
pub mod msw_symbols;
pub mod numerics;
pub mod regions;
pub mod sparse;

pub use error::{LabError, Result};
