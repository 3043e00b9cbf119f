//! Distribution of the random iterate index `tau`.
//!
//! `P(tau = j)` is proportional to `1 - beta1^(N - j)` for `j` in `0..N`, so
//! with momentum the last few iterates, whose momentum buffers have not
//! caught up with recent gradients, carry less weight.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::one_minus_pow;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauDistribution {
    n: usize,
    beta1: f64,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl TauDistribution {
    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum_j weights[j] * values[j]`.
    pub fn weighted_mean(&self, values: &[f64]) -> Result<f64> {
        crate::error::check_dim(self.n, values.len())?;
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }
}

/// Sum of unnormalized weights, `N - beta1 (1 - beta1^N) / (1 - beta1)`.
pub fn tau_normalizer(n: usize, beta1: f64) -> f64 {
    if beta1 == 0.0 {
        return n as f64;
    }
    n as f64 - beta1 * one_minus_pow(beta1, n as f64) / (1.0 - beta1)
}

pub fn tau_weights(n: usize, beta1: f64) -> Result<TauDistribution> {
    if n == 0 {
        return Err(Error::InvalidArgument("horizon N must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&beta1) {
        return Err(Error::InvalidArgument(format!("beta1 must lie in [0, 1), got {beta1}")));
    }
    let raw: Vec<f64> = (0..n).map(|j| one_minus_pow(beta1, (n - j) as f64)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mut cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    *cumulative.last_mut().expect("n >= 1") = 1.0;
    Ok(TauDistribution { n, beta1, weights, cumulative })
}

/// Draws `tau` by inverting the cumulative distribution.
pub fn sample_tau<R: Rng + ?Sized>(dist: &TauDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    dist.cumulative.partition_point(|&c| c <= u).min(dist.n - 1)
}

/// Effective horizon `N - beta1 / (1 - beta1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveN {
    pub value: f64,
    /// Whether `N > beta1 / (1 - beta1)`.
    pub valid: bool,
}

pub fn effective_n(n: usize, beta1: f64) -> EffectiveN {
    let shift = beta1 / (1.0 - beta1);
    EffectiveN { value: n as f64 - shift, valid: (n as f64) > shift }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    fn frequencies(dist: &TauDistribution, draws: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 0);
        let mut counts = vec![0usize; dist.horizon()];
        for _ in 0..draws {
            counts[sample_tau(dist, &mut rng)] += 1;
        }
        counts.iter().map(|&c| c as f64 / draws as f64).collect()
    }

    fn total_variation(a: &[f64], b: &[f64]) -> f64 {
        0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
    }

    #[test]
    fn uniform_without_momentum() {
        assert_eq!(tau_weights(4, 0.0).unwrap().weights(), &[0.25; 4]);
    }

    #[test]
    fn half_momentum_example() {
        let d = tau_weights(3, 0.5).unwrap();
        assert!((tau_normalizer(3, 0.5) - 2.125).abs() < 1e-15);
        for (w, e) in d.weights().iter().zip([7.0 / 17.0, 6.0 / 17.0, 4.0 / 17.0]) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    #[test]
    fn limit_near_one() {
        let d = tau_weights(2, 1.0 - 1e-6).unwrap();
        assert!((d.weights()[0] - 2.0 / 3.0).abs() < 1e-5);
        assert!((d.weights()[1] - 1.0 / 3.0).abs() < 1e-5);
        let d = tau_weights(2, 1.0 - 1e-12).unwrap();
        assert!((d.weights()[0] - 2.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn rejects_empty_horizon() {
        assert!(tau_weights(0, 0.5).is_err());
        assert!(tau_weights(3, 1.0).is_err());
    }

    #[test]
    fn normalizer_identity() {
        for &beta1 in &[0.0f64, 0.1, 0.5, 0.9, 0.99, 0.999] {
            for &n in &[1usize, 2, 7, 100, 1000, 10_000] {
                let direct: f64 = (0..n).map(|j| 1.0 - beta1.powi((n - j) as i32)).sum();
                let closed = tau_normalizer(n, beta1);
                assert!((direct - closed).abs() <= 1e-10 * direct, "n={n} beta1={beta1}");
                assert!(closed >= effective_n(n, beta1).value);
            }
        }
    }

    #[test]
    fn single_index_always_zero() {
        let d = tau_weights(1, 0.7).unwrap();
        let mut rng = stream_rng(1, 0);
        assert!((0..1000).all(|_| sample_tau(&d, &mut rng) == 0));
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let d = tau_weights(10, 0.0).unwrap();
        for f in frequencies(&d, 1_000_000, 5) {
            assert!((f - 0.1).abs() < 0.002);
        }
    }

    #[test]
    fn weighted_sampling_total_variation() {
        let d = tau_weights(3, 0.5).unwrap();
        assert!(total_variation(&frequencies(&d, 1_000_000, 6), d.weights()) <= 0.005);
        let d = tau_weights(50, 0.9).unwrap();
        assert!(total_variation(&frequencies(&d, 1_000_000, 7), d.weights()) <= 0.005);
    }

    #[test]
    fn weighted_mean_matches_sampled_mean() {
        let d = tau_weights(20, 0.8).unwrap();
        let values: Vec<f64> = (0..20).map(|j| (j as f64 * 0.37).sin() + 2.0).collect();
        let exact = d.weighted_mean(&values).unwrap();
        let var = d.weighted_mean(&values.iter().map(|v| (v - exact).powi(2)).collect::<Vec<_>>()).unwrap();
        let mut rng = stream_rng(8, 0);
        let draws = 200_000;
        let mc = (0..draws).map(|_| values[sample_tau(&d, &mut rng)]).sum::<f64>() / draws as f64;
        assert!((mc - exact).abs() < 4.0 * (var / draws as f64).sqrt());
    }

    #[test]
    fn effective_horizon_examples() {
        assert_eq!(effective_n(17, 0.0), EffectiveN { value: 17.0, valid: true });
        let e = effective_n(10, 0.5);
        assert!((e.value - 9.0).abs() < 1e-15 && e.valid);
        let e = effective_n(1, 0.9);
        assert!((e.value + 8.0).abs() < 1e-12 && !e.valid);
    }

    proptest! {
        #[test]
        fn weights_normalized_and_non_increasing(n in 1usize..500, beta1 in 0.0f64..0.9999) {
            let d = tau_weights(n, beta1).unwrap();
            let s: f64 = d.weights().iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(d.weights().windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
