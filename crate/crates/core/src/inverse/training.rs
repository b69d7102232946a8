use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TrainingSet;
use crate::error::{Error, Result};
use crate::nn::Mlp;

/// Mean over pairs of the mean squared output error.
pub fn dataset_mse(net: &Mlp, set: &TrainingSet) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (p, t) in set.iter() {
        let y = net.predict(p)?;
        total += y.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / t.len() as f64;
    }
    Ok(total / set.len() as f64)
}

/// Per-sample steepest descent on `1/2 |T - net(P)|^2`, reshuffled every
/// epoch from `seed`. Returns the dataset MSE after each epoch.
pub fn train_supervised(
    net: &mut Mlp,
    set: &TrainingSet,
    epochs: usize,
    rate: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if set.input_width() != net.input_dim() {
        return Err(Error::shape("training input width", net.input_dim(), set.input_width()));
    }
    if set.target_width() != net.output_dim() {
        return Err(Error::shape("training target width", net.output_dim(), set.target_width()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut curve = Vec::with_capacity(epochs);
    let mut dl_dy = vec![0.0; net.output_dim()];
    for epoch in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (p, t) = set.pair(i);
            let (y, cache) = net.forward(p)?;
            for ((g, yi), ti) in dl_dy.iter_mut().zip(&y).zip(t) {
                *g = yi - ti;
            }
            let grads = net.backward_weights(&cache, &dl_dy)?;
            net.sgd_step(&grads, rate)?;
        }
        let mse = dataset_mse(net, set)?;
        if !mse.is_finite() {
            return Err(Error::Diverged {
                tick: epoch + 1,
                what: "supervised training loss is not finite".into(),
            });
        }
        curve.push(mse);
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn linear_data() -> TrainingSet {
        let mut set = TrainingSet::new();
        for i in 0..40 {
            let x0 = (i as f64 * 0.37).sin();
            let x1 = (i as f64 * 0.91).cos();
            set.push(vec![x0, x1], vec![1.5 * x0 - 0.25 * x1 + 0.1]).unwrap();
        }
        set
    }

    #[test]
    fn perfect_net_stays_put() {
        let set = linear_data();
        let mut net = Mlp::affine(&[1.5, -0.25], 0.1).unwrap();
        let before = net.parameters();
        let curve = train_supervised(&mut net, &set, 5, 0.1, 1).unwrap();
        assert!(curve.iter().all(|l| *l < 1e-28));
        for (a, b) in before.iter().zip(net.parameters()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let set = linear_data();
        let mut net = Mlp::new(&[2, 3, 1], &[Activation::Tanh, Activation::Linear], 2).unwrap();
        let before = net.clone();
        assert!(train_supervised(&mut net, &set, 0, 0.1, 1).unwrap().is_empty());
        assert_eq!(net, before);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let set = linear_data();
        let mut net = Mlp::new(&[3, 1], &[Activation::Linear], 2).unwrap();
        assert!(train_supervised(&mut net, &set, 1, 0.1, 1).is_err());
        let mut net = Mlp::new(&[2, 2], &[Activation::Linear], 2).unwrap();
        assert!(train_supervised(&mut net, &set, 1, 0.1, 1).is_err());
    }

    #[test]
    fn shuffle_is_seeded() {
        let set = linear_data();
        let fresh = || Mlp::new(&[2, 4, 1], &[Activation::Tanh, Activation::Linear], 8).unwrap();
        let (mut a, mut b, mut c) = (fresh(), fresh(), fresh());
        train_supervised(&mut a, &set, 3, 0.05, 10).unwrap();
        train_supervised(&mut b, &set, 3, 0.05, 10).unwrap();
        train_supervised(&mut c, &set, 3, 0.05, 11).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
