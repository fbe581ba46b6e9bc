//! Numerical laboratory for a quartic boson interaction with a space-time
//! cutoff, built on momentum- and particle-number-truncated Fock spaces.
//!
//! The crate constructs truncated field operators, time-dependent interaction
//! Hamiltonians driven by separable coupling functions, several propagation
//! schemes (an exponential midpoint reference integrator and a Yosida-type
//! sliced approximation), and a set of verification experiments: kernel norm
//! bounds, smoothness of the Hamiltonian family, causal factorization of the
//! scattering operator, weak-coupling consistency against a Dyson expansion,
//! and norm-equivalence checks between energy forms at different times.

pub mod analysis;
pub mod cli;
pub mod coupling;
mod error;
pub mod fock;
pub mod hamiltonians;
pub mod linalg;
pub mod propagators;
pub mod quad;
mod sparse;

pub use error::{Error, Result};
