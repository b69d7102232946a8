//! Mimic, generalized inverse, specialized inverse, and training through a
//! frozen forward emulator.

mod control;
mod dataset;
mod emulator;
mod training;

pub use control::{bpte_train_step, specialized_step, InverseController, InverseMode, JacobianMode, OnlineTick};
pub use dataset::{collect_forward, collect_inverse, collect_mimic, TrainingSet};
pub use emulator::{ForwardEmulator, ForwardModel, InverseModel, EMULATOR_READY_MSE};
pub use training::{dataset_mse, train_supervised};
