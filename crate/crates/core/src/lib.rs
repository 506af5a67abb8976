//! Simulation of TLS-mediated multipartite entanglement between the
//! vibrational modes of a mechanical resonator.
//!
//! Two models share one parameter set: an exact truncated-Fock-space
//! master equation ([`fock`]) for a few modes, and an effective Gaussian
//! covariance-matrix model ([`gaussian`]) obtained by eliminating the
//! two-level system ([`tls`]). [`measures`] evaluates entanglement, quantum
//! Fisher information and non-Gaussianity on either representation.

pub mod config;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod io;
pub mod measures;
pub mod modulation;
pub mod ode;
pub mod params;
pub mod scenario;
pub mod tls;

pub use error::{Error, Result};
pub use params::{ModeSpectrum, ModulationScheme, SystemParams};
