//! Simulation of virtual quantum error detection (VQED) on small stabilizer codes.
//!
//! The crate evaluates error-mitigated logical expectation values in two
//! ways: exactly, by replacing every detection gadget with its averaged
//! action `ρ → PρP` on a dense density matrix, and shot by shot, by sampling
//! stabilizer indices and ancilla measurement outcomes.
//!
//! - [`pauli`]: phase-tracked Pauli strings.
//! - [`codes`]: stabilizer codes, groups, projectors and recovery tables.
//! - [`dense`]: density-matrix kernels, noise and measurement.
//! - [`exact`]: averaged-superoperator protocols (QED, SE, VQED, virtual QEC).
//! - [`sampling`]: Monte Carlo estimators.
//! - [`experiments`]: random circuits, sweeps and CSV/JSON output.

pub mod codes;
pub mod dense;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod pauli;
pub mod rng;
pub mod sampling;

pub use codes::{build_code, StabilizerCode, Syndrome};
pub use dense::{DensityMatrix, GadgetNoise, NoiseModel};
pub use error::{Result, VqedError};
pub use pauli::PauliString;
