//! Receding-horizon control over an emulator, and the HDP adaptive critic.

mod critic;
mod mpc;

pub use critic::{
    actor_update, critic_control_gradient, critic_input, critic_update, hdp_episode, hdp_step, td_error, CriticNet, HdpTick,
    U_SLOT,
};
pub use mpc::{mpc_cost, mpc_plan, MpcConfig, MpcPlan, EXHAUSTIVE_LIMIT};
