//! A network scheduling PID gains online.

use crate::classic::{PidGains, PidState};
use crate::error::{Error, Result};
use crate::inverse::JacobianMode;
use crate::nn::{Gradients, Mlp};
use crate::plant::{NarxEstimator, Plant};

#[derive(Debug, Clone, PartialEq)]
pub struct NeuroPidAssembly {
    /// Maps `[r(k+1)]`, or `[r(k+1), S(k)]` when `use_state`, to `[K1, K2, K3]`.
    pub net: Mlp,
    pub pid: PidState,
    pub rate: f64,
    pub use_state: bool,
}

impl NeuroPidAssembly {
    pub fn new(net: Mlp, rate: f64, use_state: bool) -> Result<Self> {
        if net.output_dim() != 3 {
            return Err(Error::shape("neuro-pid gain outputs", 3, net.output_dim()));
        }
        Ok(Self {
            net,
            pid: PidState::default(),
            rate,
            use_state,
        })
    }

    pub fn input(&self, r_next: f64, state: &[f64]) -> Vec<f64> {
        let mut x = vec![r_next];
        if self.use_state {
            x.extend_from_slice(state);
        }
        x
    }
}

#[derive(Debug, Clone)]
pub struct NeuroPidTick {
    pub gains: PidGains,
    pub u: f64,
    pub y: f64,
    pub e: f64,
    pub grads: Gradients,
}

/// Emits gains, applies the PID to `r(k+1) - y(k)`, steps the plant and
/// descends `1/2 e^2` through `e * dy/du * du/dK * dK/dw`.
pub fn neuro_pid_step(
    asm: &mut NeuroPidAssembly,
    plant: &mut dyn Plant,
    est: &mut NarxEstimator,
    r_next: f64,
    disturbance: f64,
    jacobian_mode: JacobianMode,
    tick: usize,
) -> Result<NeuroPidTick> {
    let state = est.state();
    let e_pid = r_next - state[0];
    let (k, cache) = asm.net.forward(&asm.input(r_next, &state))?;
    let gains = PidGains::from_array([k[0], k[1], k[2]]);
    let sens = asm.pid.sensitivity(e_pid);
    let u = asm.pid.step(&gains, e_pid)?;
    if !(u.is_finite() && gains.is_finite()) {
        return Err(Error::Diverged {
            tick,
            what: format!("neuro-pid control {u}"),
        });
    }
    let jacobian = jacobian_mode.apply(plant.jacobian_du(u));
    let y = plant.step(u, disturbance);
    if !y.is_finite() {
        return Err(Error::Diverged {
            tick,
            what: format!("plant output {y}"),
        });
    }
    est.observe(y);
    est.observe_u(u);
    let e = r_next - y;
    let scale = -e * jacobian;
    let dl_dk = [scale * sens[0], scale * sens[1], scale * sens[2]];
    let grads = asm.net.backward_weights(&cache, &dl_dk)?;
    asm.net.sgd_step(&grads, asm.rate)?;
    Ok(NeuroPidTick { gains, u, y, e, grads })
}
