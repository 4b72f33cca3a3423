//! Quantum-trajectory simulation and numerical optimality verification for
//! two-qubit entanglement generation under continuous half- and full-parity
//! measurements with local-unitary feedback.
//!
//! Units: the measurement rate is 2 (time is measured in collapse units);
//! Wiener increments have variance dt.
//!
//! Layout:
//! - [`qcore`]: states, entanglement measures, canonical-angle decomposition;
//! - [`sde`]: reproducible noise and the stochastic integrators;
//! - [`reduced`]: scalar concurrence/Bloch equations and their mapping;
//! - [`protocols`]: feedback laws and the trajectory runner;
//! - [`ensemble`]: seeded Monte Carlo with deterministic aggregation;
//! - [`optimality`]: dynamic-programming sweeps, the entropy bound, hitting
//!   times;
//! - [`cli`]: the `qparity` command-line front end.

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod optimality;
pub mod protocols;
pub mod qcore;
pub mod reduced;
pub mod sde;

pub use config::{Measurement, Mode, Protocol, SimConfig};
pub use error::{Error, Result};
pub use qcore::{
    apply_lu, concurrence_mixed, concurrence_pure, entanglement_entropy,
    fidelity_and_singlet_fraction, schmidt_extract, state_from_schmidt, DensityMatrix,
    LocalUnitary, MeasurementOp, PureState, SchmidtParams,
};
