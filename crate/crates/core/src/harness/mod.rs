//! Experiment configuration, the episode runner, metrics and export.

mod config;
mod log;
mod runner;
mod schemes;

pub use config::{
    DisturbanceKind, DisturbanceSpec, ExperimentConfig, FilterParams, HdpParams, HybridParams, MimicParams,
    MultiModuleParams, NetworkSpec, NeuroPidParams, OnlineParams, ReferenceSpec, SchemeKind, TrainingSpec, SEED_ENV,
};
pub use log::{final_window_mean_abs_e, iae, EpisodeLog, LogRow, MetricsReport, BASE_COLUMNS};
pub use runner::{
    compare, disturbance_series, export, format_compare_table, run_episode, CompareRow, CompareStatus, RunOutcome,
    DIVERGENCE_BOUND,
};
pub use schemes::TrainingReport;
