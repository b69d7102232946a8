use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Open axis-aligned box `(center_i - half_width_i, center_i + half_width_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl Region {
    pub fn new(center: Vec<f64>, half_width: Vec<f64>) -> Result<Self> {
        let region = Self { center, half_width };
        region.validate()?;
        Ok(region)
    }

    pub fn validate(&self) -> Result<()> {
        if self.center.len() != self.half_width.len() {
            return Err(Error::shape("region half widths", self.center.len(), self.half_width.len()));
        }
        if self.half_width.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("region half widths must be > 0"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

pub fn region_contains(region: &Region, state: &[f64]) -> Result<bool> {
    if state.len() != region.dim() {
        return Err(Error::shape("region state", region.dim(), state.len()));
    }
    Ok(state
        .iter()
        .zip(region.center.iter().zip(&region.half_width))
        .all(|(s, (c, w))| (s - c).abs() < *w))
}

/// How a PID and a neural controller share the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridMode {
    /// Outputs summed; the network was trained with the PID already in the loop.
    SumAfterNn,
    /// Outputs summed; the PID was tuned with the network already in the loop.
    SumAfterPid,
    /// Network inside the region, PID outside.
    RegionSwitch,
}

pub fn hybrid_step(mode: HybridMode, u_pid: f64, u_nn: f64, region: Option<&Region>, state: &[f64]) -> Result<f64> {
    match mode {
        HybridMode::SumAfterNn | HybridMode::SumAfterPid => Ok(u_pid + u_nn),
        HybridMode::RegionSwitch => {
            let region = region.ok_or_else(|| Error::invalid("region switch mode needs a region"))?;
            Ok(if region_contains(region, state)? { u_nn } else { u_pid })
        }
    }
}
