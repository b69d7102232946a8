use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Black-box discrete-time SISO plant. Only `y` is observable; `d` is an
/// additive output disturbance.
pub trait Plant: std::fmt::Debug + Send {
    fn output(&self) -> f64;

    /// Output the plant would reach from its current state under `u`, `d`,
    /// without advancing.
    fn predict(&self, u: f64, d: f64) -> f64;

    /// Advances exactly one tick and returns the new output.
    fn step(&mut self, u: f64, d: f64) -> f64;

    /// `dy(k+1)/du(k)` at the current state for control `u`.
    fn jacobian_du(&self, u: f64) -> f64;

    fn reset(&mut self, y0: f64);
}

/// `y(k+1) = a*y(k) + b*u(k) + d(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant {
    a: f64,
    b: f64,
    y: f64,
}

impl LinearPlant {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::invalid("linear plant coefficients must be finite"));
        }
        if b == 0.0 {
            return Err(Error::invalid("linear plant with b = 0 is uncontrollable"));
        }
        Ok(Self { a, b, y: 0.0 })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }
}

impl Plant for LinearPlant {
    fn output(&self) -> f64 {
        self.y
    }

    fn predict(&self, u: f64, d: f64) -> f64 {
        self.a * self.y + self.b * u + d
    }

    fn step(&mut self, u: f64, d: f64) -> f64 {
        self.y = self.predict(u, d);
        self.y
    }

    fn jacobian_du(&self, _u: f64) -> f64 {
        self.b
    }

    fn reset(&mut self, y0: f64) {
        self.y = y0;
    }
}

/// `y(k+1) = y/(1+y^2) + 0.5*u + 0.1*u^3 + d`. The control gain
/// `0.5 + 0.3*u^2` never drops below 0.5.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NonlinearPlant {
    y: f64,
}

impl NonlinearPlant {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_output(y: f64, u: f64) -> f64 {
        y / (1.0 + y * y) + 0.5 * u + 0.1 * u * u * u
    }

    pub fn control_gain(u: f64) -> f64 {
        0.5 + 0.3 * u * u
    }

    /// Unique real `u` with `next_output(y, u) = target`. The control map is a
    /// strictly increasing cubic, so Cardano's formula has one real root.
    pub fn inverse(y: f64, target: f64) -> f64 {
        // 0.1u^3 + 0.5u = c  <=>  u^3 + 5u - 10c = 0
        let c = target - y / (1.0 + y * y);
        let p = 5.0;
        let q = -10.0 * c;
        let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        (-q / 2.0 + disc).cbrt() + (-q / 2.0 - disc).cbrt()
    }
}

impl Plant for NonlinearPlant {
    fn output(&self) -> f64 {
        self.y
    }

    fn predict(&self, u: f64, d: f64) -> f64 {
        Self::next_output(self.y, u) + d
    }

    fn step(&mut self, u: f64, d: f64) -> f64 {
        self.y = self.predict(u, d);
        self.y
    }

    fn jacobian_du(&self, u: f64) -> f64 {
        Self::control_gain(u)
    }

    fn reset(&mut self, y0: f64) {
        self.y = y0;
    }
}

/// Serializable description of a built-in plant. Doubles as an exact
/// analytic model of that plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantSpec {
    Linear1 { a: f64, b: f64 },
    Nonlinear1,
}

impl PlantSpec {
    pub fn build(&self) -> Result<Box<dyn Plant>> {
        Ok(match *self {
            PlantSpec::Linear1 { a, b } => Box::new(LinearPlant::new(a, b)?),
            PlantSpec::Nonlinear1 => Box::new(NonlinearPlant::new()),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    /// Noise-free next output from output `y` under control `u`.
    pub fn next_output(&self, y: f64, u: f64) -> f64 {
        match *self {
            PlantSpec::Linear1 { a, b } => a * y + b * u,
            PlantSpec::Nonlinear1 => NonlinearPlant::next_output(y, u),
        }
    }

    pub fn jacobian_du(&self, _y: f64, u: f64) -> f64 {
        match *self {
            PlantSpec::Linear1 { b, .. } => b,
            PlantSpec::Nonlinear1 => NonlinearPlant::control_gain(u),
        }
    }

    /// Control that moves output `y` to `target` in one tick.
    pub fn inverse(&self, y: f64, target: f64) -> f64 {
        match *self {
            PlantSpec::Linear1 { a, b } => (target - a * y) / b,
            PlantSpec::Nonlinear1 => NonlinearPlant::inverse(y, target),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_examples() {
        let mut p = LinearPlant::new(0.5, 1.0).unwrap();
        assert_eq!(p.step(1.0, 0.0), 1.0);
        assert_eq!(p.jacobian_du(3.0), 1.0);

        let mut p = LinearPlant::new(0.8, 2.0).unwrap();
        p.reset(2.0);
        for k in 1..=10 {
            let y = p.step(0.0, 0.0);
            assert!((y - 2.0 * 0.8f64.powi(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gain_is_rejected() {
        assert!(LinearPlant::new(0.5, 0.0).is_err());
        assert!(PlantSpec::Linear1 { a: 0.5, b: 0.0 }.build().is_err());
    }

    #[test]
    fn nonlinear_examples() {
        let mut p = NonlinearPlant::new();
        assert_eq!(p.step(0.0, 0.0), 0.0);
        p.reset(1.0);
        assert!((p.step(1.0, 0.0) - 1.1).abs() < 1e-15);
        assert!((p.jacobian_du(2.0) - 1.7).abs() < 1e-15);
    }

    #[test]
    fn analytic_inverses_round_trip() {
        for spec in [PlantSpec::Linear1 { a: 0.5, b: 1.0 }, PlantSpec::Nonlinear1] {
            for &(y, target) in &[(0.0, 0.0), (0.3, -0.7), (-1.2, 2.5), (0.9, 0.1)] {
                let u = spec.inverse(y, target);
                assert!((spec.next_output(y, u) - target).abs() < 1e-12, "{spec:?} {y} {target}");
            }
        }
    }

    #[test]
    fn disturbance_is_additive() {
        let mut a = NonlinearPlant::new();
        let mut b = NonlinearPlant::new();
        assert!((a.step(0.4, 0.2) - b.step(0.4, 0.0) - 0.2).abs() < 1e-15);
    }
}
