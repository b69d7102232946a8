//! Receding-horizon planning over a forward emulator.
//!
//! The cost over the horizon is
//! `Q = sum_{i=L1..L2} e(k+i)^2 + rho * sum_{i=0..L2-1} (u(k+i) - u(k+i-1))^2`
//! with `e = r - y_hat` and `u(k-1)` the last applied control. Slot `i-1` of
//! every length-`L2` array refers to tick `k+i`; a term at `i = 0` does not
//! depend on the plan and is dropped.
//!
//! The search is derivative-free. The initial uniform grid is enumerated
//! exhaustively when it has at most [`EXHAUSTIVE_LIMIT`] sequences and
//! searched by coordinate descent otherwise. Each refinement sweep then halves
//! the span around the incumbent and runs one coordinate pass. Only strict
//! improvements replace the incumbent, which starts as `u_prev` held constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse::ForwardEmulator;

/// Largest initial grid (`candidates^L2`) that is enumerated in full.
pub const EXHAUSTIVE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcConfig {
    pub l1: usize,
    pub l2: usize,
    pub rho: f64,
    pub candidates_per_step: usize,
    pub u_min: f64,
    pub u_max: f64,
    pub refine_iters: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            l1: 1,
            l2: 3,
            rho: 0.01,
            candidates_per_step: 9,
            u_min: -2.0,
            u_max: 2.0,
            refine_iters: 6,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l2 == 0 || self.l1 > self.l2 {
            return Err(Error::invalid(format!(
                "mpc horizon needs 0 <= L1 <= L2 and L2 >= 1, got L1={} L2={}",
                self.l1, self.l2
            )));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::invalid("mpc rho must be finite and >= 0"));
        }
        if self.candidates_per_step < 2 {
            return Err(Error::invalid("mpc needs at least 2 candidates per step"));
        }
        if !(self.u_min.is_finite() && self.u_max.is_finite() && self.u_min < self.u_max) {
            return Err(Error::invalid("mpc control bounds need u_min < u_max"));
        }
        Ok(())
    }

    /// Uniform grid over `[u_min, u_max]`.
    pub fn initial_grid(&self) -> Vec<f64> {
        spread(self.u_min, self.u_max, self.candidates_per_step)
    }

    /// Grid spacing of the last refinement sweep.
    pub fn final_cell(&self) -> f64 {
        let span = (self.u_max - self.u_min) / 2f64.powi(self.refine_iters as i32);
        span / (self.candidates_per_step - 1) as f64
    }
}

fn spread(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + step * i as f64 })
        .collect()
}

pub fn mpc_cost(r_traj: &[f64], y_pred: &[f64], u_seq: &[f64], u_prev: f64, cfg: &MpcConfig) -> Result<f64> {
    let l2 = cfg.l2;
    if r_traj.len() != l2 {
        return Err(Error::shape("mpc r trajectory", l2, r_traj.len()));
    }
    if y_pred.len() != l2 {
        return Err(Error::shape("mpc predictions", l2, y_pred.len()));
    }
    if u_seq.len() != l2 {
        return Err(Error::shape("mpc controls", l2, u_seq.len()));
    }
    let tracking: f64 = (cfg.l1.max(1)..=l2)
        .map(|i| (r_traj[i - 1] - y_pred[i - 1]).powi(2))
        .sum();
    let mut moves = 0.0;
    let mut last = u_prev;
    for &u in u_seq {
        moves += (u - last).powi(2);
        last = u;
    }
    Ok(tracking + cfg.rho * moves)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcPlan {
    /// First element of the strategy; the only one applied.
    pub u_apply: f64,
    pub strategy: Vec<f64>,
    pub cost: f64,
    pub evaluations: usize,
}

struct Search<'a> {
    emulator: &'a ForwardEmulator,
    state: &'a [f64],
    r_traj: &'a [f64],
    u_prev: f64,
    cfg: &'a MpcConfig,
    best: Vec<f64>,
    best_cost: f64,
    evaluations: usize,
}

impl Search<'_> {
    fn cost(&mut self, seq: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let y = self.emulator.rollout(self.state, seq)?;
        mpc_cost(self.r_traj, &y, seq, self.u_prev, self.cfg)
    }

    fn offer(&mut self, seq: &[f64]) -> Result<bool> {
        let q = self.cost(seq)?;
        if q < self.best_cost {
            self.best_cost = q;
            self.best.copy_from_slice(seq);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn enumerate(&mut self, grid: &[f64]) -> Result<()> {
        let l2 = self.cfg.l2;
        let mut idx = vec![0usize; l2];
        let mut seq: Vec<f64> = vec![grid[0]; l2];
        loop {
            self.offer(&seq)?;
            // odometer increment, last position fastest: lexicographic order
            let mut pos = l2;
            loop {
                if pos == 0 {
                    return Ok(());
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < grid.len() {
                    seq[pos] = grid[idx[pos]];
                    break;
                }
                idx[pos] = 0;
                seq[pos] = grid[0];
            }
        }
    }

    /// One pass over positions; returns whether anything improved.
    fn coordinate_pass(&mut self, candidates_for: impl Fn(f64) -> Vec<f64>) -> Result<bool> {
        let mut improved = false;
        for pos in 0..self.cfg.l2 {
            let mut trial = self.best.clone();
            for c in candidates_for(self.best[pos]) {
                trial[pos] = c;
                improved |= self.offer(&trial)?;
                trial[pos] = self.best[pos];
            }
        }
        Ok(improved)
    }
}

/// Best control sequence for the horizon; the caller applies only `u_apply`
/// and replans next tick.
pub fn mpc_plan(
    emulator: &ForwardEmulator,
    state: &[f64],
    r_traj: &[f64],
    u_prev: f64,
    cfg: &MpcConfig,
) -> Result<MpcPlan> {
    cfg.validate()?;
    emulator.ensure_ready()?;
    if r_traj.len() != cfg.l2 {
        return Err(Error::shape("mpc r trajectory", cfg.l2, r_traj.len()));
    }
    let start = vec![u_prev.clamp(cfg.u_min, cfg.u_max); cfg.l2];
    let mut search = Search {
        emulator,
        state,
        r_traj,
        u_prev,
        cfg,
        best: start.clone(),
        best_cost: f64::INFINITY,
        evaluations: 0,
    };
    search.offer(&start)?;

    let grid = cfg.initial_grid();
    let full = grid.len().checked_pow(cfg.l2 as u32).unwrap_or(usize::MAX);
    if full <= EXHAUSTIVE_LIMIT {
        search.enumerate(&grid)?;
    } else {
        for _ in 0..grid.len() * cfg.l2 {
            if !search.coordinate_pass(|_| grid.clone())? {
                break;
            }
        }
    }

    let mut span = cfg.u_max - cfg.u_min;
    for _ in 0..cfg.refine_iters {
        span /= 2.0;
        let (lo, hi, n) = (cfg.u_min, cfg.u_max, cfg.candidates_per_step);
        search.coordinate_pass(|center| {
            spread(center - span / 2.0, center + span / 2.0, n)
                .into_iter()
                .map(|u| u.clamp(lo, hi))
                .collect()
        })?;
    }

    if !search.best_cost.is_finite() {
        return Err(Error::Diverged {
            tick: 0,
            what: "mpc cost is not finite".into(),
        });
    }
    Ok(MpcPlan {
        u_apply: search.best[0],
        strategy: search.best,
        cost: search.best_cost,
        evaluations: search.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{NarxShape, PlantSpec};

    fn cfg(l1: usize, l2: usize, rho: f64) -> MpcConfig {
        MpcConfig {
            l1,
            l2,
            rho,
            ..MpcConfig::default()
        }
    }

    #[test]
    fn cost_examples() {
        let c = cfg(1, 2, 0.0);
        assert_eq!(mpc_cost(&[1.0, 2.0], &[1.0, 2.0], &[0.3, 0.1], 0.0, &c).unwrap(), 0.0);
        assert_eq!(mpc_cost(&[1.0, 1.0], &[0.5, 0.5], &[0.0, 0.0], 0.0, &c).unwrap(), 0.5);
        let c = cfg(1, 3, 7.0);
        assert_eq!(mpc_cost(&[0.0; 3], &[0.0; 3], &[0.4; 3], 0.4, &c).unwrap(), 0.0);
        assert!(mpc_cost(&[0.0; 2], &[0.0; 3], &[0.4; 3], 0.4, &c).is_err());
    }

    #[test]
    fn l1_skips_early_errors() {
        let c = cfg(2, 3, 0.0);
        let q = mpc_cost(&[1.0, 1.0, 1.0], &[0.0, 0.5, 1.0], &[0.0; 3], 0.0, &c).unwrap();
        assert_eq!(q, 0.25);
    }

    #[test]
    fn holds_u_prev_when_already_on_target() {
        // y = 0.4 at rest under u = 0.2 with a = 0.5, b = 1
        let spec = PlantSpec::Linear1 { a: 0.5, b: 1.0 };
        let emu = ForwardEmulator::exact(spec, NarxShape::new(1, 0));
        let c = cfg(1, 3, 0.1);
        let plan = mpc_plan(&emu, &[0.4, 0.4], &[0.4; 3], 0.2, &c).unwrap();
        assert_eq!(plan.strategy, vec![0.2; 3]);
        assert_eq!(plan.cost, 0.0);
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(cfg(3, 2, 0.0).validate().is_err());
        assert!(cfg(0, 0, 0.0).validate().is_err());
        assert!(cfg(1, 2, -1.0).validate().is_err());
    }

    #[test]
    fn large_grids_use_coordinate_descent() {
        let spec = PlantSpec::Linear1 { a: 0.5, b: 1.0 };
        let emu = ForwardEmulator::exact(spec, NarxShape::new(1, 0));
        let c = cfg(1, 6, 0.0);
        let plan = mpc_plan(&emu, &[0.0, 0.0], &[0.5; 6], 0.0, &c).unwrap();
        assert!(plan.evaluations < 9usize.pow(6));
        assert!(plan.cost < 1e-4, "{}", plan.cost);
    }
}
