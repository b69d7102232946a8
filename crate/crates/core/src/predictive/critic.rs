//! Heuristic dynamic programming: a critic estimating the discounted cost
//! `J(k) = sum_i gamma^i e(k+i)^2` and an actor trained through it.

use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::plant::{NarxEstimator, Plant};
use crate::WEIGHT_GUARD;

/// Index of `u(k)` inside the critic input `z = [r(k+1), u(k), S(k)]`.
pub const U_SLOT: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CriticNet {
    pub net: Mlp,
    pub gamma: f64,
    /// Critic learning rate.
    pub rate_critic: f64,
    /// Actor learning rate.
    pub rate_actor: f64,
}

impl CriticNet {
    pub fn new(net: Mlp, gamma: f64, rate_critic: f64, rate_actor: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::invalid(format!("discount gamma must lie in (0, 1], got {gamma}")));
        }
        if net.output_dim() != 1 {
            return Err(Error::shape("critic output", 1, net.output_dim()));
        }
        if net.input_dim() <= U_SLOT {
            return Err(Error::shape("critic input", U_SLOT + 1, net.input_dim()));
        }
        Ok(Self {
            net,
            gamma,
            rate_critic,
            rate_actor,
        })
    }

    pub fn estimate(&self, z: &[f64]) -> Result<f64> {
        self.net.predict_scalar(z)
    }
}

pub fn critic_input(r_next: f64, u: f64, state: &[f64]) -> Vec<f64> {
    let mut z = Vec::with_capacity(2 + state.len());
    z.push(r_next);
    z.push(u);
    z.extend_from_slice(state);
    z
}

/// `delta = cost + gamma * J_next - J`.
pub fn td_error(cost: f64, j_next: f64, j: f64, gamma: f64) -> f64 {
    cost + gamma * j_next - j
}

/// `w += rate_critic * delta * dJ/dw` (descent on `delta^2 / 2` with the
/// bootstrapped target held fixed).
pub fn critic_update(critic: &mut CriticNet, z: &[f64], delta: f64) -> Result<()> {
    let (_, cache) = critic.net.forward(z)?;
    let grads = critic.net.backward_weights(&cache, &[-delta])?;
    critic.net.sgd_step(&grads, critic.rate_critic)
}

/// `dJ/du` read off the frozen critic at the control slot of `z`.
pub fn critic_control_gradient(critic: &CriticNet, z: &[f64]) -> Result<f64> {
    if z.len() <= U_SLOT {
        return Err(Error::invalid(format!(
            "critic input of length {} has no control slot {U_SLOT}",
            z.len()
        )));
    }
    let (_, cache) = critic.net.forward(z)?;
    Ok(critic.net.backward_inputs(&cache, &[1.0])?[U_SLOT])
}

/// `w_actor -= rate * dJ/du * du/dw`. The critic is only read.
pub fn actor_update(actor: &mut Mlp, critic: &CriticNet, x: &[f64], z: &[f64], rate: f64) -> Result<()> {
    let dj_du = critic_control_gradient(critic, z)?;
    let (_, cache) = actor.forward(x)?;
    let grads = actor.backward_weights(&cache, &[dj_du])?;
    actor.sgd_step(&grads, rate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdpTick {
    pub u: f64,
    pub y: f64,
    pub e: f64,
    pub j_hat: f64,
    pub delta: f64,
}

fn diverged(tick: usize, what: impl Into<String>) -> Error {
    Error::Diverged {
        tick,
        what: what.into(),
    }
}

fn actor_input(r_next: f64, state: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(1 + state.len());
    x.push(r_next);
    x.extend_from_slice(state);
    x
}

/// One online HDP tick: act on `[r(k+1), S(k)]`, step the plant, score
/// `e(k+1)^2`, bootstrap `J` at the next state under the current actor, then
/// update the critic and the actor in that order.
///
/// `r_after` is the setpoint one tick beyond `r_next`. `exploration` is added
/// to the policy output before it reaches the plant and the critic; the actor
/// is still improved at its own, noise-free control.
#[allow(clippy::too_many_arguments)]
pub fn hdp_step(
    actor: &mut Mlp,
    critic: &mut CriticNet,
    plant: &mut dyn Plant,
    est: &mut NarxEstimator,
    r_next: f64,
    r_after: f64,
    disturbance: f64,
    exploration: f64,
    tick: usize,
) -> Result<HdpTick> {
    let state = est.state();
    let x = actor_input(r_next, &state);
    let u_policy = actor.predict_scalar(&x)?;
    if !u_policy.is_finite() {
        return Err(diverged(tick, format!("control {u_policy}")));
    }
    let u = u_policy + exploration;
    let z = critic_input(r_next, u, &state);
    let j_hat = critic.estimate(&z)?;

    let y = plant.step(u, disturbance);
    if !y.is_finite() {
        return Err(diverged(tick, format!("plant output {y}")));
    }
    est.observe(y);
    est.observe_u(u);
    let e = r_next - y;

    let next_state = est.state();
    let u_next = actor.predict_scalar(&actor_input(r_after, &next_state))?;
    let j_next = critic.estimate(&critic_input(r_after, u_next, &next_state))?;
    let delta = td_error(e * e, j_next, j_hat, critic.gamma);
    if !(delta.is_finite() && j_hat.is_finite()) {
        return Err(diverged(tick, format!("td error {delta}")));
    }

    critic_update(critic, &z, delta)?;
    let z_policy = critic_input(r_next, u_policy, &state);
    actor_update(actor, critic, &x, &z_policy, critic.rate_actor)?;
    if critic.net.max_abs_parameter() > WEIGHT_GUARD || actor.max_abs_parameter() > WEIGHT_GUARD {
        return Err(diverged(tick, "weight guard exceeded"));
    }
    Ok(HdpTick {
        u,
        y,
        e,
        j_hat,
        delta,
    })
}

/// Runs [`hdp_step`] over a setpoint schedule (`setpoints[k]` is `r(k+1)`).
/// `disturbances` may be shorter than the episode; missing ticks read 0.
pub fn hdp_episode(
    actor: &mut Mlp,
    critic: &mut CriticNet,
    plant: &mut dyn Plant,
    est: &mut NarxEstimator,
    setpoints: &[f64],
    disturbances: &[f64],
) -> Result<Vec<HdpTick>> {
    let mut ticks = Vec::with_capacity(setpoints.len());
    for (k, &r_next) in setpoints.iter().enumerate() {
        let r_after = setpoints.get(k + 1).copied().unwrap_or(r_next);
        let d = disturbances.get(k).copied().unwrap_or(0.0);
        ticks.push(hdp_step(actor, critic, plant, est, r_next, r_after, d, 0.0, k + 1)?);
    }
    Ok(ticks)
}
