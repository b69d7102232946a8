//! Incremental discrete PID law, its gain sensitivities, and a first-order
//! reference model.

use serde::{Deserialize, Serialize};

use crate::controller::{Controller, Observation};
use crate::error::{Error, Result};

/// Proportional, integral and derivative gains.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl PidGains {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Self {
        Self { k1, k2, k3 }
    }

    pub fn from_array(k: [f64; 3]) -> Self {
        Self::new(k[0], k[1], k[2])
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.k1, self.k2, self.k3]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|k| k.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub e_prev: f64,
    pub e_prev2: f64,
    pub u_prev: f64,
}

impl PidState {
    /// `u = u(k-1) + K1 (e - e(k-1)) + K2 e + K3 (e - 2 e(k-1) + e(k-2))`,
    /// then shifts the history.
    pub fn step(&mut self, gains: &PidGains, e: f64) -> Result<f64> {
        if !e.is_finite() {
            return Err(Error::invalid(format!("pid error must be finite, got {e}")));
        }
        let sens = du_dk(e, self.e_prev, self.e_prev2);
        let u = self.u_prev + gains.k1 * sens[0] + gains.k2 * sens[1] + gains.k3 * sens[2];
        self.e_prev2 = self.e_prev;
        self.e_prev = e;
        self.u_prev = u;
        Ok(u)
    }

    /// Sensitivity of the next output to each gain, for error `e`.
    pub fn sensitivity(&self, e: f64) -> [f64; 3] {
        du_dk(e, self.e_prev, self.e_prev2)
    }
}

/// `du/dK_i` of the incremental PID law.
pub fn du_dk(e: f64, e_prev: f64, e_prev2: f64) -> [f64; 3] {
    [e - e_prev, e, e - 2.0 * e_prev + e_prev2]
}

/// Fixed-gain PID acting on `r(k+1) - y(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PidController {
    pub gains: PidGains,
    pub state: PidState,
}

impl PidController {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            state: PidState::default(),
        }
    }
}

impl Controller for PidController {
    fn act(&mut self, obs: &Observation<'_>) -> Result<f64> {
        self.state.step(&self.gains, obs.r_next - obs.y)
    }

    fn reset(&mut self) {
        self.state = PidState::default();
    }
}

/// `r'(k+1) = (1 - tau) r'(k) + tau r(k+1)`, stable for `tau` in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceModel {
    tau: f64,
    r_current: f64,
}

impl ReferenceModel {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::invalid(format!("reference model tau must lie in (0, 1], got {tau}")));
        }
        Ok(Self { tau, r_current: 0.0 })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn current(&self) -> f64 {
        self.r_current
    }

    pub fn step(&mut self, r: f64) -> f64 {
        self.r_current = (1.0 - self.tau) * self.r_current + self.tau * r;
        self.r_current
    }

    pub fn reset(&mut self, r0: f64) {
        self.r_current = r0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pid_examples() {
        let gains = PidGains::new(2.0, 0.5, 0.1);
        let mut st = PidState::default();
        assert!((st.step(&gains, 1.0).unwrap() - 2.6).abs() < 1e-15);

        let mut st = PidState::default();
        assert_eq!(st.step(&gains, 0.0).unwrap(), 0.0);

        let mut st = PidState {
            e_prev: 0.3,
            e_prev2: -0.1,
            u_prev: 1.25,
        };
        assert_eq!(st.step(&PidGains::default(), 4.0).unwrap(), 1.25);
    }

    #[test]
    fn pid_rejects_non_finite_error() {
        let mut st = PidState::default();
        assert!(st.step(&PidGains::new(1.0, 1.0, 1.0), f64::NAN).is_err());
    }

    #[test]
    fn constant_error_is_pure_integral_action() {
        let gains = PidGains::new(1.3, 0.4, 0.7);
        let mut st = PidState::default();
        let e = 0.25;
        st.step(&gains, e).unwrap();
        st.step(&gains, e).unwrap();
        let mut prev = st.step(&gains, e).unwrap();
        for _ in 0..5 {
            let u = st.step(&gains, e).unwrap();
            assert!((u - prev - gains.k2 * e).abs() < 1e-14);
            prev = u;
        }
    }

    #[test]
    fn sensitivity_examples() {
        assert_eq!(du_dk(1.0, 0.5, 0.0), [0.5, 1.0, 0.0]);
        assert_eq!(du_dk(0.0, 0.0, 0.0), [0.0, 0.0, 0.0]);
        assert_eq!(du_dk(0.8, 0.8, 0.8), [0.0, 0.8, 0.0]);
    }

    #[test]
    fn reference_examples() {
        let mut m = ReferenceModel::new(1.0).unwrap();
        assert_eq!(m.step(3.0), 3.0);

        let mut m = ReferenceModel::new(0.5).unwrap();
        let seq: Vec<f64> = (0..3).map(|_| m.step(1.0)).collect();
        assert_eq!(seq, vec![0.5, 0.75, 0.875]);

        let mut m = ReferenceModel::new(0.3).unwrap();
        for k in 1..=20 {
            let r = m.step(2.0);
            assert!((2.0 - r - 2.0 * 0.7f64.powi(k)).abs() < 1e-12);
        }
        assert!(ReferenceModel::new(0.0).is_err());
        assert!(ReferenceModel::new(1.5).is_err());
    }
}
