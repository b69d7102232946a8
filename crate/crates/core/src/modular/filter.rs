//! Disturbance filtering: a forward emulator exposes the deviation caused by
//! an unmeasured disturbance and an inverse emulator turns it into a
//! correction applied on the next tick.

use crate::error::Result;
use crate::inverse::{ForwardEmulator, InverseModel};
use crate::plant::{NarxEstimator, Plant};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterAssembly {
    pub forward: ForwardEmulator,
    pub inverse: InverseModel,
    /// Correction carried into the next tick.
    pub u_corr: f64,
}

impl FilterAssembly {
    pub fn new(forward: ForwardEmulator, inverse: InverseModel) -> Result<Self> {
        forward.ensure_ready()?;
        Ok(Self {
            forward,
            inverse,
            u_corr: 0.0,
        })
    }

    pub fn reset(&mut self) {
        self.u_corr = 0.0;
    }

    /// Control offset that shifts the output by `deviation`, read from the
    /// inverse emulator as `g(deviation, S) - g(0, S)`.
    pub fn correction_for(&self, deviation: f64, state: &[f64]) -> Result<f64> {
        if deviation == 0.0 {
            return Ok(0.0);
        }
        Ok(self.inverse.control(deviation, state)? - self.inverse.control(0.0, state)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterTick {
    pub u_fin: f64,
    pub u_corr: f64,
    pub y: f64,
    pub y_hat: f64,
    pub e_dist: f64,
}

/// Applies `u_fin = u_ctl + u_corr` to both the plant and the forward
/// emulator, then sets the next correction to cancel `e_dist = y - y_hat`.
pub fn filter_step(
    asm: &mut FilterAssembly,
    u_ctl: f64,
    plant: &mut dyn Plant,
    est: &mut NarxEstimator,
    disturbance: f64,
) -> Result<FilterTick> {
    asm.forward.ensure_ready()?;
    let state = est.state();
    let u_corr = asm.u_corr;
    let u_fin = u_ctl + u_corr;
    let y_hat = asm.forward.predict(u_fin, &state)?;
    let y = plant.step(u_fin, disturbance);
    est.observe(y);
    est.observe_u(u_fin);
    let e_dist = y - y_hat;
    asm.u_corr = -asm.correction_for(e_dist, &state)?;
    Ok(FilterTick {
        u_fin,
        u_corr,
        y,
        y_hat,
        e_dist,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{LinearPlant, NarxShape, PlantSpec};

    fn exact(spec: PlantSpec) -> FilterAssembly {
        FilterAssembly::new(ForwardEmulator::exact(spec, NarxShape::default()), InverseModel::Exact(spec)).unwrap()
    }

    #[test]
    fn quiet_without_disturbance() {
        let spec = PlantSpec::Nonlinear1;
        let mut asm = exact(spec);
        let mut plant = spec.build().unwrap();
        let mut est = NarxEstimator::new(NarxShape::default());
        for (k, u) in [0.3, -0.4, 0.9, 0.1].into_iter().enumerate() {
            let t = filter_step(&mut asm, u, plant.as_mut(), &mut est, 0.0).unwrap();
            assert_eq!(t.e_dist, 0.0, "tick {k}");
            assert_eq!(t.u_fin, u);
            assert_eq!(asm.u_corr, 0.0);
        }
    }

    #[test]
    fn first_tick_passes_control_through() {
        let spec = PlantSpec::Linear1 { a: 0.5, b: 1.0 };
        let mut asm = exact(spec);
        let mut plant = spec.build().unwrap();
        let mut est = NarxEstimator::new(NarxShape::default());
        let t = filter_step(&mut asm, 0.4, plant.as_mut(), &mut est, 0.2).unwrap();
        assert_eq!(t.u_fin, 0.4);
        assert!((t.e_dist - 0.2).abs() < 1e-15);
    }

    #[test]
    fn constant_disturbance_is_cancelled_on_a_linear_plant() {
        let spec = PlantSpec::Linear1 { a: 0.5, b: 2.0 };
        let mut asm = exact(spec);
        let mut plant = LinearPlant::new(0.5, 2.0).unwrap();
        let mut est = NarxEstimator::new(NarxShape::default());
        filter_step(&mut asm, 0.0, &mut plant, &mut est, 0.2).unwrap();
        assert!((asm.u_corr + 0.1).abs() < 1e-15);
        let y0 = plant.output();
        let t = filter_step(&mut asm, 0.0, &mut plant, &mut est, 0.2).unwrap();
        assert!((t.y - 0.5 * y0).abs() < 1e-15);
    }

    #[test]
    fn unready_emulator_is_refused() {
        let net = crate::nn::Mlp::affine(&[1.0, 0.5, 0.0], 0.0).unwrap();
        let fwd = ForwardEmulator::network(net, NarxShape::default()).unwrap();
        assert!(FilterAssembly::new(fwd, InverseModel::Exact(PlantSpec::Nonlinear1)).is_err());
    }
}
