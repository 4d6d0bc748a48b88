//! Simulation and exact computation for the facilitated exclusion process on
//! a periodic one-dimensional lattice.

pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod fde;
mod indexed;
pub mod lattice;
pub mod measures;
pub mod profile;
pub mod rng;
pub mod verify;
pub mod zr;

pub use error::{FepError, Result};
