//! Simulation of assisted cloning and orthogonal complementing of an
//! unknown qubit.
//!
//! A preparer who knows `ψ` helps remote parties who share entanglement
//! with the holder of `ψ` end up with perfect copies of `ψ` or of its
//! orthogonal complement `ψ⊥`, using one classical bit per copy. The crate
//! provides a dense state-vector simulator ([`statevec`]), projective
//! measurements ([`measurement`]), the protocol engines ([`protocol`]),
//! classical transcripts and audits ([`parties`]), seeded Monte Carlo
//! statistics ([`montecarlo`]) and the command-line front end ([`cli`]).

pub mod cli;
pub mod error;
pub mod measurement;
pub mod montecarlo;
pub mod parties;
pub mod protocol;
pub mod statevec;

pub use error::{Error, Result};
