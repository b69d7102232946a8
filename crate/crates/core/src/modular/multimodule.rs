//! Paired forward/inverse modules mixed by responsibility weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse::{ForwardEmulator, InverseModel};
use crate::plant::{NarxEstimator, Plant};

#[derive(Debug, Clone, PartialEq)]
pub struct PairedModule {
    pub id: String,
    pub forward: ForwardEmulator,
    pub inverse: InverseModel,
}

/// Responsibility of each module for the current plant behaviour.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsibilityWeights {
    pub lambda: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlendMode {
    #[default]
    Weighted,
    WinnerTakeAll,
}

/// `e_l = y(k) - y_hat_l(k)`, each module predicting from `u(k-1)` and `S(k-1)`.
pub fn module_errors(modules: &[PairedModule], u_prev: f64, state_prev: &[f64], y: f64) -> Result<Vec<f64>> {
    modules
        .iter()
        .map(|m| Ok(y - m.forward.predict(u_prev, state_prev)?))
        .collect()
}

/// `lambda_l = exp(-e_l^2 / sigma^2) / sum_j exp(-e_j^2 / sigma^2)`.
pub fn responsibilities(errors: &[f64], sigma: f64) -> Result<ResponsibilityWeights> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("responsibility scale sigma must be > 0, got {sigma}")));
    }
    if errors.is_empty() {
        return Err(Error::invalid("responsibilities need at least one module"));
    }
    let logits: Vec<f64> = errors.iter().map(|e| -(e * e) / (sigma * sigma)).collect();
    if logits.iter().any(|l| l.is_nan()) {
        return Err(Error::invalid("module errors must not be NaN"));
    }
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = if top == f64::NEG_INFINITY {
        vec![1.0; logits.len()]
    } else {
        logits.iter().map(|l| (l - top).exp()).collect()
    };
    let total: f64 = exps.iter().sum();
    Ok(ResponsibilityWeights {
        lambda: exps.iter().map(|x| x / total).collect(),
        sigma,
    })
}

pub fn blend(weights: &ResponsibilityWeights, controls: &[f64], mode: BlendMode) -> Result<f64> {
    let lambda = &weights.lambda;
    if lambda.len() != controls.len() {
        return Err(Error::shape("blend controls", lambda.len(), controls.len()));
    }
    if lambda.is_empty() {
        return Err(Error::invalid("blend needs at least one module"));
    }
    Ok(match mode {
        BlendMode::Weighted => lambda.iter().zip(controls).map(|(l, u)| l * u).sum(),
        BlendMode::WinnerTakeAll => {
            let mut best = 0;
            for (i, &l) in lambda.iter().enumerate() {
                if l > lambda[best] {
                    best = i;
                }
            }
            controls[best]
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTick {
    pub u: f64,
    pub y: f64,
    pub e: f64,
    pub lambda: Vec<f64>,
    pub module_errors: Vec<f64>,
}

/// Closed-loop collective controller. Each tick first re-scores the modules
/// on the previous transition, then blends their inverse controls computed on
/// `[r(k+1), S(k)]`.
#[derive(Debug, Clone)]
pub struct MultiModuleController {
    modules: Vec<PairedModule>,
    sigma: f64,
    mode: BlendMode,
    previous: Option<(f64, Vec<f64>)>,
}

impl MultiModuleController {
    pub fn new(modules: Vec<PairedModule>, sigma: f64, mode: BlendMode) -> Result<Self> {
        if modules.is_empty() {
            return Err(Error::invalid("multi-module control needs at least one module"));
        }
        responsibilities(&[0.0], sigma)?;
        for m in &modules {
            m.forward.ensure_ready()?;
        }
        Ok(Self {
            modules,
            sigma,
            mode,
            previous: None,
        })
    }

    pub fn modules(&self) -> &[PairedModule] {
        &self.modules
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }

    pub fn step(
        &mut self,
        plant: &mut dyn Plant,
        est: &mut NarxEstimator,
        r_next: f64,
        disturbance: f64,
    ) -> Result<MultiTick> {
        let state = est.state();
        let errors = match &self.previous {
            Some((u_prev, s_prev)) => module_errors(&self.modules, *u_prev, s_prev, state[0])?,
            None => vec![0.0; self.modules.len()],
        };
        let weights = responsibilities(&errors, self.sigma)?;
        let controls = self
            .modules
            .iter()
            .map(|m| m.inverse.control(r_next, &state))
            .collect::<Result<Vec<_>>>()?;
        let u = blend(&weights, &controls, self.mode)?;
        let y = plant.step(u, disturbance);
        est.observe(y);
        est.observe_u(u);
        self.previous = Some((u, state));
        Ok(MultiTick {
            u,
            y,
            e: r_next - y,
            lambda: weights.lambda,
            module_errors: errors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{NarxShape, PlantSpec};

    fn exact_module(id: &str, spec: PlantSpec) -> PairedModule {
        PairedModule {
            id: id.into(),
            forward: ForwardEmulator::exact(spec, NarxShape::default()),
            inverse: InverseModel::Exact(spec),
        }
    }

    #[test]
    fn responsibility_examples() {
        assert_eq!(responsibilities(&[0.3, 0.3], 1.0).unwrap().lambda, vec![0.5, 0.5]);
        let l = responsibilities(&[1.0, 2.0], 1.0).unwrap().lambda;
        let e1 = (-1f64).exp();
        let e4 = (-4f64).exp();
        assert!((l[0] - e1 / (e1 + e4)).abs() < 1e-15);
        let l = responsibilities(&[0.0, 1e3, 1e4], 0.5).unwrap().lambda;
        assert_eq!(l[0], 1.0);
        assert!(responsibilities(&[1.0], 0.0).is_err());
        assert!(responsibilities(&[1.0], -1.0).is_err());
    }

    #[test]
    fn blend_examples() {
        let w = ResponsibilityWeights {
            lambda: vec![0.3, 0.7],
            sigma: 1.0,
        };
        assert!((blend(&w, &[1.0, 2.0], BlendMode::Weighted).unwrap() - 1.7).abs() < 1e-15);
        let w = ResponsibilityWeights {
            lambda: vec![0.4, 0.6],
            sigma: 1.0,
        };
        assert_eq!(blend(&w, &[1.0, 2.0], BlendMode::WinnerTakeAll).unwrap(), 2.0);
        let tie = ResponsibilityWeights {
            lambda: vec![0.5, 0.5],
            sigma: 1.0,
        };
        assert_eq!(blend(&tie, &[1.0, 2.0], BlendMode::WinnerTakeAll).unwrap(), 1.0);
        assert!(blend(&tie, &[1.0], BlendMode::Weighted).is_err());
    }

    #[test]
    fn module_error_arithmetic() {
        let a = exact_module("a", PlantSpec::Linear1 { a: 0.0, b: 1.0 });
        let b = exact_module("b", PlantSpec::Linear1 { a: 0.0, b: 2.0 });
        let e = module_errors(&[a, b], 1.0, &[0.0, 0.0], 1.5).unwrap();
        assert_eq!(e, vec![0.5, -0.5]);
    }

    #[test]
    fn single_module_is_its_inverse_controller() {
        let spec = PlantSpec::Linear1 { a: 0.5, b: 1.0 };
        let mut ctl = MultiModuleController::new(vec![exact_module("a", spec)], 0.5, BlendMode::Weighted).unwrap();
        let mut plant = spec.build().unwrap();
        let mut est = NarxEstimator::new(NarxShape::default());
        for r in [0.5, 0.5, -0.3, 0.8] {
            let t = ctl.step(plant.as_mut(), &mut est, r, 0.0).unwrap();
            assert!((t.y - r).abs() < 1e-12);
            assert_eq!(t.lambda, vec![1.0]);
        }
    }

    #[test]
    fn identical_modules_share_responsibility() {
        let spec = PlantSpec::Nonlinear1;
        let mods = vec![exact_module("a", spec), exact_module("b", spec)];
        let mut ctl = MultiModuleController::new(mods, 0.1, BlendMode::Weighted).unwrap();
        let mut plant = spec.build().unwrap();
        let mut est = NarxEstimator::new(NarxShape::default());
        for r in [0.5, -0.5, 0.2] {
            let t = ctl.step(plant.as_mut(), &mut est, r, 0.0).unwrap();
            assert_eq!(t.lambda, vec![0.5, 0.5]);
        }
    }
}
