//! Central finite-difference check of both backward passes on random networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mlp::{Activation, Mlp};
use crate::error::Result;

pub const FD_STEP: f64 = 1e-5;
pub const REL_TOLERANCE: f64 = 1e-6;
/// Entries whose finite-difference magnitude is below this are skipped.
pub const FD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub max_rel_error_weights: f64,
    pub max_rel_error_inputs: f64,
    pub checked_entries: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error_weights < REL_TOLERANCE && self.max_rel_error_inputs < REL_TOLERANCE
    }
}

fn rel_error(analytic: f64, numeric: f64) -> Option<f64> {
    if numeric.abs() <= FD_FLOOR {
        return None;
    }
    Some((analytic - numeric).abs() / analytic.abs().max(numeric.abs()))
}

fn weighted_output(net: &Mlp, x: &[f64], seed_grad: &[f64]) -> Result<f64> {
    Ok(net
        .predict(x)?
        .iter()
        .zip(seed_grad)
        .map(|(y, c)| y * c)
        .sum())
}

/// Checks one network at one input with the linear loss `L = c . y`.
pub fn check_network(net: &Mlp, x: &[f64], seed_grad: &[f64]) -> Result<GradCheckReport> {
    let (_, cache) = net.forward(x)?;
    let grads = net.backward_weights(&cache, seed_grad)?;
    let input_grad = net.backward_inputs(&cache, seed_grad)?;

    let mut checked = 0;
    let mut worst_w: f64 = 0.0;
    let base = net.parameters();
    let analytic = grads.flatten();
    let mut probe = net.clone();
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + FD_STEP;
        probe.set_parameters(&p)?;
        let plus = weighted_output(&probe, x, seed_grad)?;
        p[i] = base[i] - FD_STEP;
        probe.set_parameters(&p)?;
        let minus = weighted_output(&probe, x, seed_grad)?;
        if let Some(e) = rel_error(analytic[i], (plus - minus) / (2.0 * FD_STEP)) {
            worst_w = worst_w.max(e);
            checked += 1;
        }
    }

    let mut worst_x: f64 = 0.0;
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        xp[i] += FD_STEP;
        let plus = weighted_output(net, &xp, seed_grad)?;
        xp[i] = x[i] - FD_STEP;
        let minus = weighted_output(net, &xp, seed_grad)?;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        for analytic in [input_grad[i], grads.input[i]] {
            if let Some(e) = rel_error(analytic, numeric) {
                worst_x = worst_x.max(e);
                checked += 1;
            }
        }
    }

    Ok(GradCheckReport {
        dims: std::iter::once(net.input_dim())
            .chain(net.layers().iter().map(|l| l.out_dim()))
            .collect(),
        activations: net.layers().iter().map(|l| l.activation()).collect(),
        max_rel_error_weights: worst_w,
        max_rel_error_inputs: worst_x,
        checked_entries: checked,
    })
}

/// Runs `cases` random shapes (1 to 3 layers, widths 1 to 6, mixed activations).
pub fn run_suite(cases: usize, seed: u64) -> Result<Vec<GradCheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..cases)
        .map(|case| {
            let depth = rng.gen_range(1..=3);
            let dims: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..=6)).collect();
            let acts: Vec<Activation> = (0..depth)
                .map(|_| {
                    if rng.gen_bool(0.7) {
                        Activation::Tanh
                    } else {
                        Activation::Linear
                    }
                })
                .collect();
            let scale = rng.gen_range(0.2..1.2);
            let net = Mlp::with_init_scale(&dims, &acts, seed ^ case as u64, scale)?;
            let x: Vec<f64> = (0..dims[0]).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let c: Vec<f64> = (0..dims[depth]).map(|_| rng.gen_range(-1.0..1.0)).collect();
            check_network(&net, &x, &c)
        })
        .collect()
}
