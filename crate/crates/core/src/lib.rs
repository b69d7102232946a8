//! Neural-network control schemes for discrete-time SISO plants.
//!
//! The building blocks live in [`nn`] (dense networks with both reverse
//! passes), [`plant`] (simulated plants and NARX state estimates) and
//! [`classic`] (PID law and reference model). The schemes are grouped by
//! family in [`inverse`], [`predictive`] and [`modular`]; [`harness`] wires
//! them into reproducible experiments driven by the `ncb` binary.

pub mod classic;
pub mod controller;
pub mod error;
pub mod harness;
pub mod inverse;
pub mod modular;
pub mod nn;
pub mod plant;
pub mod predictive;

pub use controller::{Controller, Observation};
pub use error::{Error, Result};

/// Parameter magnitude beyond which online training is declared divergent.
pub const WEIGHT_GUARD: f64 = 1e6;
