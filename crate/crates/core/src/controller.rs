use crate::error::Result;

/// What a controller sees at tick `k`.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    /// Setpoint for the next tick, `r(k+1)`.
    pub r_next: f64,
    /// Current output `y(k)`.
    pub y: f64,
    /// Current state estimate `S(k)`.
    pub state: &'a [f64],
}

/// Maps setpoint and state estimate to a control signal.
pub trait Controller {
    fn act(&mut self, obs: &Observation<'_>) -> Result<f64>;

    /// Clears per-episode memory. Learned parameters are kept.
    fn reset(&mut self) {}
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn act(&mut self, obs: &Observation<'_>) -> Result<f64> {
        (**self).act(obs)
    }

    fn reset(&mut self) {
        (**self).reset()
    }
}
