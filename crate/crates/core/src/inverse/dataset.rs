use std::io::Write;

use crate::classic::{PidGains, PidState};
use crate::error::{Error, Result};
use crate::plant::{ExcitationSpec, NarxEstimator, Plant};

/// Ordered supervised pairs `(P_i, T_i)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, input: Vec<f64>, target: Vec<f64>) -> Result<()> {
        if let Some(first) = self.inputs.first() {
            if first.len() != input.len() {
                return Err(Error::shape("training input", first.len(), input.len()));
            }
            if self.targets[0].len() != target.len() {
                return Err(Error::shape("training target", self.targets[0].len(), target.len()));
            }
        }
        self.inputs.push(input);
        self.targets.push(target);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_width(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn target_width(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    pub fn pair(&self, i: usize) -> (&[f64], &[f64]) {
        (&self.inputs[i], &self.targets[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.inputs
            .iter()
            .zip(&self.targets)
            .map(|(p, t)| (p.as_slice(), t.as_slice()))
    }

    /// One row per pair: input fields `p0..`, then target fields `t0..`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.input_width())
            .map(|i| format!("p{i}"))
            .chain((0..self.target_width()).map(|i| format!("t{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (p, t) in self.iter() {
            let row: Vec<String> = p.iter().chain(t).map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn check_output(tick: usize, y: f64) -> Result<()> {
    if y.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            tick,
            what: format!("plant output {y}"),
        })
    }
}

/// Records a PID run: `P_i = [r(i+1), S(i)]`, `T_i = u(i)`.
///
/// `setpoints[i]` is `r(i+1)`. The estimator must already reflect the plant's
/// history. The PID acts on `r(i+1) - y(i)`.
pub fn collect_mimic(
    plant: &mut dyn Plant,
    gains: &PidGains,
    setpoints: &[f64],
    est: &mut NarxEstimator,
) -> Result<TrainingSet> {
    let mut set = TrainingSet::new();
    let mut pid = PidState::default();
    for (i, &r_next) in setpoints.iter().enumerate() {
        let state = est.state();
        let u = pid.step(gains, r_next - plant.output())?;
        let y = plant.step(u, 0.0);
        check_output(i + 1, y)?;
        let mut p = Vec::with_capacity(1 + state.len());
        p.push(r_next);
        p.extend(state);
        set.push(p, vec![u])?;
        est.observe(y);
        est.observe_u(u);
    }
    Ok(set)
}

/// Drives the plant with the excitation and records each tick as
/// `P = [y(i), S(i-1)]`, `T = u` where `u` is the control that moved the
/// plant from `S(i-1)` to `y(i)`.
pub fn collect_inverse(
    plant: &mut dyn Plant,
    excitation: &ExcitationSpec,
    est: &mut NarxEstimator,
) -> Result<TrainingSet> {
    collect_with(plant, excitation, est, |u, y, prior| {
        let mut p = Vec::with_capacity(1 + prior.len());
        p.push(y);
        p.extend_from_slice(prior);
        (p, vec![u])
    })
}

/// Forward-emulator data: `P = [u, S(i-1)]`, `T = y(i)`.
pub fn collect_forward(
    plant: &mut dyn Plant,
    excitation: &ExcitationSpec,
    est: &mut NarxEstimator,
) -> Result<TrainingSet> {
    collect_with(plant, excitation, est, |u, y, prior| {
        let mut p = Vec::with_capacity(1 + prior.len());
        p.push(u);
        p.extend_from_slice(prior);
        (p, vec![y])
    })
}

fn collect_with(
    plant: &mut dyn Plant,
    excitation: &ExcitationSpec,
    est: &mut NarxEstimator,
    make_pair: impl Fn(f64, f64, &[f64]) -> (Vec<f64>, Vec<f64>),
) -> Result<TrainingSet> {
    let mut set = TrainingSet::new();
    for (i, u) in excitation.generate()?.into_iter().enumerate() {
        let prior = est.state();
        let y = plant.step(u, 0.0);
        check_output(i + 1, y)?;
        let (p, t) = make_pair(u, y, &prior);
        set.push(p, t)?;
        est.observe(y);
        est.observe_u(u);
    }
    Ok(set)
}
