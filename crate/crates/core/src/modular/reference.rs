use crate::classic::ReferenceModel;
use crate::controller::{Controller, Observation};
use crate::error::Result;

/// Feeds the reference model's trajectory `r'` to an inner controller in
/// place of the raw setpoint.
#[derive(Debug, Clone)]
pub struct ReferenceWrapped<C> {
    pub model: ReferenceModel,
    pub inner: C,
}

pub fn wrap_with_reference<C: Controller>(model: ReferenceModel, inner: C) -> ReferenceWrapped<C> {
    ReferenceWrapped { model, inner }
}

impl<C: Controller> ReferenceWrapped<C> {
    /// Reference output most recently handed to the inner controller.
    pub fn current_reference(&self) -> f64 {
        self.model.current()
    }
}

impl<C: Controller> Controller for ReferenceWrapped<C> {
    fn act(&mut self, obs: &Observation<'_>) -> Result<f64> {
        let r_prime = self.model.step(obs.r_next);
        self.inner.act(&Observation { r_next: r_prime, ..*obs })
    }

    fn reset(&mut self) {
        self.model.reset(0.0);
        self.inner.reset();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Default)]
    struct Echo(Vec<f64>);

    impl Controller for Echo {
        fn act(&mut self, obs: &Observation<'_>) -> Result<f64> {
            self.0.push(obs.r_next);
            Ok(obs.r_next)
        }
    }

    fn drive<C: Controller>(c: &mut C, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| c.act(&Observation { r_next: 1.0, y: 0.0, state: &[] }).unwrap())
            .collect()
    }

    #[test]
    fn unit_tau_is_transparent() {
        let mut w = wrap_with_reference(ReferenceModel::new(1.0).unwrap(), Echo::default());
        assert_eq!(drive(&mut w, 3), vec![1.0; 3]);
        let mut twice = wrap_with_reference(
            ReferenceModel::new(1.0).unwrap(),
            wrap_with_reference(ReferenceModel::new(1.0).unwrap(), Echo::default()),
        );
        assert_eq!(drive(&mut twice, 3), vec![1.0; 3]);
    }

    #[test]
    fn half_tau_approaches_geometrically() {
        let mut w = wrap_with_reference(ReferenceModel::new(0.5).unwrap(), Echo::default());
        assert_eq!(drive(&mut w, 3), vec![0.5, 0.75, 0.875]);
        assert_eq!(w.inner.0, vec![0.5, 0.75, 0.875]);
    }
}
