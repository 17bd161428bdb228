//! Moving-mesh finite-element simulation of pitting corrosion.
//!
//! The electrolyte above a corroding metal surface is triangulated once; the
//! node count and connectivity never change. Each time step moves the mesh
//! toward the pits, solves the nonlinear potential problem, and advances the
//! pit fronts with the Faraday velocity.

pub mod adapt;
pub mod crystal;
pub mod electrochem;
pub mod error;
pub mod fem;
pub mod io;
pub mod front;
pub mod mesh;
pub mod sim;

pub use error::{PitError, Result};
