//! Simulation of photon polarization measurements: qubit collapse and its
//! entropy bookkeeping, polarizer cascades, polarization-entangled pairs, a
//! delayed-choice Mach-Zehnder interferometer, and a basis-encoding bit
//! transmission scheme together with the no-signaling analysis that bounds
//! what it can carry.
//!
//! Every Monte Carlo routine is a pure function of its inputs and a `u64`
//! seed; see [`rng`] for the stream layout.

pub mod eigen;
pub mod entangle;
pub mod entropy;
mod error;
pub mod interferometer;
pub mod optics;
pub mod protocol;
pub mod quantum;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
