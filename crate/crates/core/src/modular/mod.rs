//! Multi-module control, neuro-PID tuning, hybrid PID/network wiring,
//! disturbance filtering and reference-model wrapping.

mod filter;
mod hybrid;
mod multimodule;
mod neuro_pid;
mod reference;

pub use filter::{filter_step, FilterAssembly, FilterTick};
pub use hybrid::{hybrid_step, region_contains, HybridMode, Region};
pub use multimodule::{
    blend, module_errors, responsibilities, BlendMode, MultiModuleController, MultiTick, PairedModule,
    ResponsibilityWeights,
};
pub use neuro_pid::{neuro_pid_step, NeuroPidAssembly, NeuroPidTick};
pub use reference::{wrap_with_reference, ReferenceWrapped};
