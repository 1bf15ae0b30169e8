//! Workbench for learning filters of continuously-measured qubits.
//!
//! The crate simulates σz-monitored single-qubit trajectories with an
//! orthogonal Hamiltonian switch ([`sim`]), trains small recurrent filters
//! ([`backbones`]) whose output is either a Kraus-structured CPTP update or an
//! unconstrained regression ([`heads`], [`train`]), runs physics-based SME
//! filters ([`baseline`]), and scores everything with fidelity, Bures and
//! physicality metrics ([`eval`]).

pub mod ad;
pub mod backbones;
pub mod baseline;
pub mod digest;
pub mod error;
pub mod eval;
pub mod heads;
pub mod invariants;
pub mod model;
pub mod qcore;
pub mod rng;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
