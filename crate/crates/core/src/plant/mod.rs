//! Simulated plants, NARX state estimation and excitation signals.

mod excitation;
mod models;
mod narx;

pub use excitation::{ExcitationKind, ExcitationSpec};
pub use models::{LinearPlant, NonlinearPlant, Plant, PlantSpec};
pub use narx::{phase_state, NarxEstimator, NarxShape};
