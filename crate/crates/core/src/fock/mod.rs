//! Exact model on a truncated Fock space: operators, the master equation
//! and density-matrix utilities.

mod dynamics;
mod operators;
mod state;

pub use dynamics::*;
pub use operators::*;
pub use state::*;
