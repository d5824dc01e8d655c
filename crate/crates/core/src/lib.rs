//! Simulation and analysis of time-bin entangled photon pairs from a pulsed
//! quantum-dot cascade.
//!
//! The crate is organized bottom-up:
//!
//! - [`hilbert`]: dense complex linear algebra for few-qubit states
//! - [`dynamics`]: four-level driven-dissipative dynamics of the emitter
//!   (two-photon Rabi, Ramsey, echo)
//! - [`source`]: pair states produced per pump pulse and emission-event
//!   sampling for the two excitation schemes
//! - [`analyzer`]: unbalanced-interferometer analyzers as POVMs, joint and
//!   singles statistics, and time-tag sampling
//! - [`timetag`]: the binary/CSV time-tag stream formats and the coincidence
//!   counting engine
//! - [`tomography`]: count simulation, maximum-likelihood state
//!   reconstruction, and entanglement measures
//!
//! All randomness is counter-addressable ([`rng`]): results are reproducible
//! bit for bit for a given seed, independent of threading or sharding.

pub mod analyzer;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod rng;
pub mod source;
pub mod timetag;
pub mod tomography;

pub use error::{Error, Result};

/// Crate version, for embedding in generated reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
