//! Quantum bootstrap embedding on hydrogen chains.
//!
//! The crate builds minimal-basis integrals, fragments the molecule into
//! overlapping embedding problems, solves each fragment exactly in a qubit
//! representation, and drives the fragments to agree on their shared
//! density matrices using simulated SWAP-test and amplitude-estimation
//! measurements.

pub mod error;
pub mod fragment;
pub mod integrals;
pub mod linalg;
pub mod matching;
pub mod optimizer;
pub mod oracle;
pub mod qubits;
pub mod rng;
pub mod scf;

pub use error::{QbeError, Result};
