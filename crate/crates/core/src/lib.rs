//! Wave-function renormalization of particle-field Hamiltonians on truncated,
//! discretized Fock spaces.

pub mod dressing;
pub mod config;
pub mod convergence;
pub mod doi;
pub mod eigen;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod modes;
pub mod nelson;
pub mod sparse;
pub mod spinboson;
pub mod suite;
pub mod sweep;
pub mod vhm;

pub use error::{Error, Result};
