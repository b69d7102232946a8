use sha2::{Digest, Sha256};

use super::{dataset_mse, TrainingSet};
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::plant::{NarxShape, PlantSpec};

/// Held-out MSE below which a forward emulator may drive other schemes.
pub const EMULATOR_READY_MSE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum ForwardModel {
    /// Learned one-step predictor on `[u(k), S(k)]`.
    Network(Mlp),
    /// Analytic model of a built-in plant; reads `S[0] = y(k)`.
    Exact(PlantSpec),
}

/// One-step predictor `y_hat(k+1) = f(u(k), S(k))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardEmulator {
    model: ForwardModel,
    shape: NarxShape,
    validation_mse: Option<f64>,
    ready_threshold: f64,
}

impl ForwardEmulator {
    pub fn network(net: Mlp, shape: NarxShape) -> Result<Self> {
        if net.input_dim() != 1 + shape.width() {
            return Err(Error::shape("forward emulator input", 1 + shape.width(), net.input_dim()));
        }
        if net.output_dim() != 1 {
            return Err(Error::shape("forward emulator output", 1, net.output_dim()));
        }
        Ok(Self {
            model: ForwardModel::Network(net),
            shape,
            validation_mse: None,
            ready_threshold: EMULATOR_READY_MSE,
        })
    }

    /// Exact emulator; always ready.
    pub fn exact(spec: PlantSpec, shape: NarxShape) -> Self {
        Self {
            model: ForwardModel::Exact(spec),
            shape,
            validation_mse: Some(0.0),
            ready_threshold: EMULATOR_READY_MSE,
        }
    }

    pub fn with_ready_threshold(mut self, threshold: f64) -> Self {
        self.ready_threshold = threshold;
        self
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    pub fn net(&self) -> Option<&Mlp> {
        match &self.model {
            ForwardModel::Network(net) => Some(net),
            ForwardModel::Exact(_) => None,
        }
    }

    pub fn net_mut(&mut self) -> Option<&mut Mlp> {
        self.validation_mse = None;
        match &mut self.model {
            ForwardModel::Network(net) => Some(net),
            ForwardModel::Exact(_) => None,
        }
    }

    pub fn shape(&self) -> NarxShape {
        self.shape
    }

    pub fn validation_mse(&self) -> Option<f64> {
        self.validation_mse
    }

    /// Scores the emulator on held-out forward pairs and remembers the result.
    pub fn validate(&mut self, held_out: &TrainingSet) -> Result<f64> {
        let mse = match &self.model {
            ForwardModel::Network(net) => dataset_mse(net, held_out)?,
            ForwardModel::Exact(spec) => {
                let mut total = 0.0;
                for (p, t) in held_out.iter() {
                    total += (spec.next_output(p[1], p[0]) - t[0]).powi(2);
                }
                if held_out.is_empty() {
                    0.0
                } else {
                    total / held_out.len() as f64
                }
            }
        };
        self.validation_mse = Some(mse);
        Ok(mse)
    }

    pub fn is_ready(&self) -> bool {
        matches!(self.validation_mse, Some(m) if m < self.ready_threshold)
    }

    pub fn ensure_ready(&self) -> Result<()> {
        if self.is_ready() {
            Ok(())
        } else {
            Err(Error::EmulatorNotReady {
                mse: self.validation_mse.unwrap_or(f64::INFINITY),
                threshold: self.ready_threshold,
            })
        }
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.shape.width() {
            return Err(Error::shape("emulator state", self.shape.width(), state.len()));
        }
        Ok(())
    }

    fn input(u: f64, state: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(1 + state.len());
        x.push(u);
        x.extend_from_slice(state);
        x
    }

    pub fn predict(&self, u: f64, state: &[f64]) -> Result<f64> {
        self.check_state(state)?;
        match &self.model {
            ForwardModel::Network(net) => net.predict_scalar(&Self::input(u, state)),
            ForwardModel::Exact(spec) => Ok(spec.next_output(state[0], u)),
        }
    }

    /// Carries `dL/dy_hat` back through the frozen emulator to `dL/du`.
    pub fn backprop_to_control(&self, u: f64, state: &[f64], dl_dyhat: f64) -> Result<f64> {
        self.check_state(state)?;
        match &self.model {
            ForwardModel::Network(net) => {
                let (_, cache) = net.forward(&Self::input(u, state))?;
                Ok(net.backward_inputs(&cache, &[dl_dyhat])?[0])
            }
            ForwardModel::Exact(spec) => Ok(dl_dyhat * spec.jacobian_du(state[0], u)),
        }
    }

    /// Predicted outputs over a control sequence, feeding each prediction back
    /// into the NARX state.
    pub fn rollout(&self, state: &[f64], controls: &[f64]) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let mut s = state.to_vec();
        let mut out = Vec::with_capacity(controls.len());
        for &u in controls {
            let y = self.predict(u, &s)?;
            s = self.shape.shift(&s, y, u);
            out.push(y);
        }
        Ok(out)
    }

    pub fn fingerprint(&self) -> String {
        match &self.model {
            ForwardModel::Network(net) => net.fingerprint(),
            ForwardModel::Exact(spec) => {
                hex::encode(Sha256::digest(format!("{spec:?}").as_bytes()))
            }
        }
    }
}

/// Inverse model `u = g(target, S)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InverseModel {
    /// Network on `[target, S]`.
    Network(Mlp),
    Exact(PlantSpec),
}

impl InverseModel {
    pub fn control(&self, target: f64, state: &[f64]) -> Result<f64> {
        match self {
            InverseModel::Network(net) => {
                let mut x = Vec::with_capacity(1 + state.len());
                x.push(target);
                x.extend_from_slice(state);
                net.predict_scalar(&x)
            }
            InverseModel::Exact(spec) => {
                let y = *state
                    .first()
                    .ok_or_else(|| Error::invalid("inverse model needs a non-empty state"))?;
                Ok(spec.inverse(y, target))
            }
        }
    }

    pub fn fingerprint(&self) -> String {
        match self {
            InverseModel::Network(net) => net.fingerprint(),
            InverseModel::Exact(spec) => hex::encode(Sha256::digest(format!("inverse {spec:?}").as_bytes())),
        }
    }
}
