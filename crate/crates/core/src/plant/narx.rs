use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::TappedDelayLine;

/// Regression orders of a NARX state vector: `N+1` outputs, `Q` past controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NarxShape {
    pub n: usize,
    #[serde(default)]
    pub q: usize,
}

impl Default for NarxShape {
    fn default() -> Self {
        Self { n: 1, q: 0 }
    }
}

impl NarxShape {
    pub fn new(n: usize, q: usize) -> Self {
        Self { n, q }
    }

    pub fn width(&self) -> usize {
        self.n + 1 + self.q
    }

    /// State one tick later: `y_next` becomes the newest output and `u` the
    /// newest past control.
    pub fn shift(&self, state: &[f64], y_next: f64, u: f64) -> Vec<f64> {
        debug_assert_eq!(state.len(), self.width());
        let mut next = Vec::with_capacity(self.width());
        next.push(y_next);
        next.extend_from_slice(&state[..self.n]);
        if self.q > 0 {
            next.push(u);
            next.extend_from_slice(&state[self.n + 1..self.n + self.q]);
        }
        next
    }
}

/// State estimate `[y(k) .. y(k-N), u(k-1) .. u(k-Q)]`, zero-padded until the
/// history fills.
#[derive(Debug, Clone, PartialEq)]
pub struct NarxEstimator {
    shape: NarxShape,
    y_line: TappedDelayLine,
    u_line: TappedDelayLine,
}

impl NarxEstimator {
    pub fn new(shape: NarxShape) -> Self {
        Self {
            shape,
            y_line: TappedDelayLine::new(shape.n + 1, 0.0),
            u_line: TappedDelayLine::new(shape.q, 0.0),
        }
    }

    pub fn shape(&self) -> NarxShape {
        self.shape
    }

    pub fn width(&self) -> usize {
        self.shape.width()
    }

    pub fn observe(&mut self, y: f64) {
        self.y_line.push(y);
    }

    pub fn observe_u(&mut self, u: f64) {
        self.u_line.push(u);
    }

    pub fn state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.width());
        self.y_line.extend_into(&mut s);
        self.u_line.extend_into(&mut s);
        s
    }

    pub fn y_line(&self) -> &TappedDelayLine {
        &self.y_line
    }

    pub fn reset(&mut self) {
        self.y_line.clear();
        self.u_line.clear();
    }
}

/// `[y, y', .., y^(N)]` from backward differences over the newest `N+1`
/// samples of `y_line` (one tick per step).
pub fn phase_state(y_line: &TappedDelayLine, order: usize) -> Result<Vec<f64>> {
    if y_line.filled() < order + 1 {
        return Err(Error::invalid(format!(
            "phase state of order {order} needs {} observations, have {}",
            order + 1,
            y_line.filled()
        )));
    }
    let mut diffs: Vec<f64> = (0..=order).map(|i| y_line.tap(i)).collect();
    let mut out = Vec::with_capacity(order + 1);
    for _ in 0..=order {
        out.push(diffs[0]);
        // diffs[i] <- diffs[i] - diffs[i+1]: next backward difference, newest first
        for i in 0..diffs.len().saturating_sub(1) {
            diffs[i] -= diffs[i + 1];
        }
        diffs.pop();
    }
    Ok(out)
}
