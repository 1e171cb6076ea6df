//! Vehicle routing with the Quantum Approximate Optimization Algorithm.
//!
//! The pipeline formulates a VRP instance as a constrained binary program
//! ([`formulation`]), compiles it to a QUBO with quadratic penalties
//! ([`qubo`]) and to an Ising Hamiltonian ([`ising`]), simulates the QAOA
//! circuit exactly ([`simulator`]), tunes its angles ([`optimizer`]), and
//! decodes and scores the samples ([`analysis`]). [`resources`] estimates
//! circuit sizes without simulating.

pub mod analysis;
pub mod bits;
pub mod error;
pub mod formulation;
pub mod instance;
pub mod ising;
pub mod optimizer;
pub mod qubo;
pub mod resources;
pub mod simulator;
pub mod sweep;

pub use bits::BitString;
pub use error::{Error, Result};
pub use instance::VrpInstance;
