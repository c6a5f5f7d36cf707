//! Discretized degenerate divergence-form operators, their heat and wave
//! evolutions, intrinsic distances, and numerical checks of the bounds that
//! tie them together.

pub mod cli;
pub mod coeffs;
pub mod diagnose;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod metric;
pub mod quad;

pub use error::{LabError, Result};
