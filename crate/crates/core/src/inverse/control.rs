use serde::{Deserialize, Serialize};

use super::ForwardEmulator;
use crate::controller::{Controller, Observation};
use crate::error::{Error, Result};
use crate::nn::{Gradients, Mlp, TappedDelayLine};
use crate::plant::{NarxEstimator, NarxShape, Plant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InverseMode {
    /// Input `[r(k+1), S(k)]`.
    ClosedLoop,
    /// Input `[r(k+1), r(k), .., r(k-N+1)]`.
    OpenLoop,
}

/// How the plant Jacobian enters online inverse training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    Analytic,
    SignOnly,
}

impl JacobianMode {
    pub fn apply(self, jacobian: f64) -> f64 {
        match self {
            JacobianMode::Analytic => jacobian,
            JacobianMode::SignOnly if jacobian == 0.0 => 0.0,
            JacobianMode::SignOnly => jacobian.signum(),
        }
    }
}

/// A trained inverse network connected as a controller.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseController {
    net: Mlp,
    mode: InverseMode,
    /// Open loop only: `r(k), r(k-1), ..`.
    setpoint_line: TappedDelayLine,
}

impl InverseController {
    pub fn closed_loop(net: Mlp, shape: NarxShape) -> Result<Self> {
        if net.input_dim() != 1 + shape.width() {
            return Err(Error::shape("closed-loop inverse input", 1 + shape.width(), net.input_dim()));
        }
        Self::checked_scalar(net, InverseMode::ClosedLoop, 0)
    }

    /// `delays` is `N`, the number of past setpoints fed alongside `r(k+1)`.
    pub fn open_loop(net: Mlp, delays: usize) -> Result<Self> {
        if net.input_dim() != 1 + delays {
            return Err(Error::shape("open-loop inverse input", 1 + delays, net.input_dim()));
        }
        Self::checked_scalar(net, InverseMode::OpenLoop, delays)
    }

    fn checked_scalar(net: Mlp, mode: InverseMode, delays: usize) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::shape("inverse controller output", 1, net.output_dim()));
        }
        Ok(Self {
            net,
            mode,
            setpoint_line: TappedDelayLine::new(delays, 0.0),
        })
    }

    pub fn mode(&self) -> InverseMode {
        self.mode
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn input(&self, r_next: f64, state: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.net.input_dim());
        x.push(r_next);
        match self.mode {
            InverseMode::ClosedLoop => x.extend_from_slice(state),
            InverseMode::OpenLoop => self.setpoint_line.extend_into(&mut x),
        }
        x
    }

    pub fn act(&mut self, r_next: f64, state: &[f64]) -> Result<f64> {
        let u = self.net.predict_scalar(&self.input(r_next, state))?;
        if self.mode == InverseMode::OpenLoop {
            self.setpoint_line.push(r_next);
        }
        Ok(u)
    }
}

impl Controller for InverseController {
    fn act(&mut self, obs: &Observation<'_>) -> Result<f64> {
        InverseController::act(self, obs.r_next, obs.state)
    }

    fn reset(&mut self) {
        self.setpoint_line.clear();
    }
}

/// One tick of online inverse training.
#[derive(Debug, Clone)]
pub struct OnlineTick {
    pub u: f64,
    pub y: f64,
    /// Tracking error `r(k+1) - y(k+1)`.
    pub e: f64,
    /// Emulator prediction (emulator-based training only).
    pub y_hat: Option<f64>,
    /// Parameter gradients applied this tick (before scaling by the rate).
    pub grads: Gradients,
}

fn controller_input(r_next: f64, state: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(1 + state.len());
    x.push(r_next);
    x.extend_from_slice(state);
    x
}

/// Acts on `[r(k+1), S(k)]`, steps the plant, and descends `1/2 e^2`
/// through `e * dy/du * du/dw`. In sign-only mode `dy/du` becomes its sign.
pub fn specialized_step(
    net: &mut Mlp,
    plant: &mut dyn Plant,
    est: &mut NarxEstimator,
    r_next: f64,
    disturbance: f64,
    rate: f64,
    jacobian_mode: JacobianMode,
) -> Result<OnlineTick> {
    let state = est.state();
    let (out, cache) = net.forward(&controller_input(r_next, &state))?;
    let u = out[0];
    let jacobian = jacobian_mode.apply(plant.jacobian_du(u));
    let y = plant.step(u, disturbance);
    est.observe(y);
    est.observe_u(u);
    let e = r_next - y;
    if jacobian == 0.0 {
        log::warn!("zero plant jacobian at u = {u}; skipping update");
        return Ok(OnlineTick {
            u,
            y,
            e,
            y_hat: None,
            grads: Gradients::zeros_like(net),
        });
    }
    let grads = net.backward_weights(&cache, &[-e * jacobian])?;
    net.sgd_step(&grads, rate)?;
    Ok(OnlineTick {
        u,
        y,
        e,
        y_hat: None,
        grads,
    })
}

/// Online controller training through a frozen forward emulator: the
/// tracking error is carried back through the emulator to `dL/du`, then
/// through the controller. The emulator is only read.
pub fn bpte_train_step(
    net: &mut Mlp,
    emulator: &ForwardEmulator,
    plant: &mut dyn Plant,
    est: &mut NarxEstimator,
    r_next: f64,
    disturbance: f64,
    rate: f64,
) -> Result<OnlineTick> {
    emulator.ensure_ready()?;
    let state = est.state();
    let (out, cache) = net.forward(&controller_input(r_next, &state))?;
    let u = out[0];
    let y_hat = emulator.predict(u, &state)?;
    let y = plant.step(u, disturbance);
    est.observe(y);
    est.observe_u(u);
    let e = r_next - y;
    let dl_du = emulator.backprop_to_control(u, &state, -e)?;
    let grads = net.backward_weights(&cache, &[dl_du])?;
    net.sgd_step(&grads, rate)?;
    Ok(OnlineTick {
        u,
        y,
        e,
        y_hat: Some(y_hat),
        grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use crate::plant::{LinearPlant, NonlinearPlant, PlantSpec};

    #[test]
    fn closed_loop_input_wiring() {
        let net = Mlp::affine(&[1.0, 0.0, 0.0], 0.0).unwrap();
        let ctl = InverseController::closed_loop(net, NarxShape::new(1, 0)).unwrap();
        assert_eq!(ctl.input(2.0, &[1.0, 0.0]), vec![2.0, 1.0, 0.0]);
    }

    #[test]
    fn open_loop_input_wiring() {
        let net = Mlp::affine(&[1.0, 1.0, 1.0], 0.0).unwrap();
        let mut ctl = InverseController::open_loop(net, 2).unwrap();
        ctl.act(2.0, &[]).unwrap();
        ctl.act(2.0, &[]).unwrap();
        assert_eq!(ctl.input(2.0, &[]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn width_gate_between_modes() {
        let net = Mlp::affine(&[1.0, -0.5, 0.0], 0.0).unwrap();
        assert!(InverseController::closed_loop(net.clone(), NarxShape::new(1, 0)).is_ok());
        assert!(InverseController::open_loop(net.clone(), 1).is_err());
        assert!(InverseController::open_loop(net, 2).is_ok());
    }

    #[test]
    fn exact_inverse_tracks_in_one_step() {
        let net = Mlp::affine(&[1.0, -0.5, 0.0], 0.0).unwrap();
        let mut ctl = InverseController::closed_loop(net, NarxShape::new(1, 0)).unwrap();
        let mut plant = LinearPlant::new(0.5, 1.0).unwrap();
        let mut est = NarxEstimator::new(NarxShape::new(1, 0));
        for r in [0.3, 0.9, -0.4, -0.4] {
            let u = ctl.act(r, &est.state()).unwrap();
            assert!((u - (r - 0.5 * plant.output())).abs() < 1e-15);
            let y = plant.step(u, 0.0);
            est.observe(y);
            assert!((y - r).abs() < 1e-15);
        }
    }

    fn random_controller(seed: u64) -> Mlp {
        Mlp::new(&[3, 8, 1], &[Activation::Tanh, Activation::Linear], seed).unwrap()
    }

    #[test]
    fn zero_error_means_no_update() {
        // an exact inverse produces e = 0 and hence a zero gradient
        let mut net = Mlp::affine(&[1.0, -0.5, 0.0], 0.0).unwrap();
        let before = net.clone();
        let mut plant = LinearPlant::new(0.5, 1.0).unwrap();
        let mut est = NarxEstimator::new(NarxShape::new(1, 0));
        let tick = specialized_step(&mut net, &mut plant, &mut est, 0.6, 0.0, 0.1, JacobianMode::Analytic).unwrap();
        assert!(tick.e.abs() < 1e-15);
        assert_eq!(net, before);
    }

    #[test]
    fn unit_jacobian_is_plain_backprop() {
        let mut net = random_controller(4);
        let reference = net.clone();
        let mut plant = LinearPlant::new(0.5, 1.0).unwrap();
        let mut est = NarxEstimator::new(NarxShape::new(1, 0));
        let tick = specialized_step(&mut net, &mut plant, &mut est, 0.7, 0.0, 0.1, JacobianMode::Analytic).unwrap();
        let (_, cache) = reference.forward(&[0.7, 0.0, 0.0]).unwrap();
        let plain = reference.backward_weights(&cache, &[-tick.e]).unwrap();
        assert_eq!(tick.grads, plain);
    }

    #[test]
    fn zero_rate_never_changes_weights() {
        for mode in [JacobianMode::Analytic, JacobianMode::SignOnly] {
            let mut net = random_controller(5);
            let before = net.clone();
            let mut plant = NonlinearPlant::new();
            let mut est = NarxEstimator::new(NarxShape::new(1, 0));
            for _ in 0..20 {
                specialized_step(&mut net, &mut plant, &mut est, 0.5, 0.0, 0.0, mode).unwrap();
            }
            assert_eq!(net, before);
        }
    }

    #[test]
    fn online_training_reduces_error() {
        let mut net = random_controller(6);
        let mut plant = LinearPlant::new(0.5, 1.0).unwrap();
        let mut est = NarxEstimator::new(NarxShape::new(1, 0));
        let first = specialized_step(&mut net, &mut plant, &mut est, 0.5, 0.0, 0.05, JacobianMode::Analytic).unwrap();
        let mut last = first.clone();
        for _ in 1..200 {
            last = specialized_step(&mut net, &mut plant, &mut est, 0.5, 0.0, 0.05, JacobianMode::Analytic).unwrap();
        }
        assert!(last.e.abs() < first.e.abs(), "{} vs {}", last.e, first.e);
    }

    #[test]
    fn bpte_leaves_emulator_alone() {
        let spec = PlantSpec::Linear1 { a: 0.5, b: 1.0 };
        let shape = NarxShape::new(1, 0);
        let mut emu = ForwardEmulator::network(Mlp::affine(&[1.0, 0.5, 0.0], 0.0).unwrap(), shape).unwrap();
        emu.validate(&{
            let mut set = super::super::TrainingSet::new();
            set.push(vec![0.2, 0.4, 0.0], vec![spec.next_output(0.4, 0.2)]).unwrap();
            set
        })
        .unwrap();
        let hash = emu.fingerprint();
        let mut net = random_controller(7);
        let mut plant = LinearPlant::new(0.5, 1.0).unwrap();
        let mut est = NarxEstimator::new(shape);
        for k in 0..50 {
            let r = if k < 25 { 0.5 } else { -0.5 };
            bpte_train_step(&mut net, &emu, &mut plant, &mut est, r, 0.0, 0.05).unwrap();
        }
        assert_eq!(emu.fingerprint(), hash);
    }

    #[test]
    fn bpte_refuses_unready_emulator() {
        let emu = ForwardEmulator::network(Mlp::affine(&[1.0, 0.5, 0.0], 0.0).unwrap(), NarxShape::new(1, 0)).unwrap();
        let mut net = random_controller(7);
        let mut plant = LinearPlant::new(0.5, 1.0).unwrap();
        let mut est = NarxEstimator::new(NarxShape::new(1, 0));
        let res = bpte_train_step(&mut net, &emu, &mut plant, &mut est, 0.5, 0.0, 0.05);
        assert!(matches!(res, Err(Error::EmulatorNotReady { .. })));
    }
}
