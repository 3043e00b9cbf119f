use rand::distributions::{Bernoulli, Distribution};
use rand::Rng;

use super::{huber, HuberProfile, HuberTerm, StochasticObjective};

/// Six-dimensional toy problem with rare, heavily weighted events.
///
/// With independent `Q_i ~ Bernoulli(p_i)` and `p_i = 10^-i`,
///
/// ```text
/// f(x) = sum_i (1 - Q_i) huber(x_i - 1) + Q_i / sqrt(p_i) huber(x_i + 1)
/// ```
///
/// Each coordinate is pulled towards 1 most of the time and, rarely, towards
/// -1 with weight `1/sqrt(p_i)`. The rare-event share of `E[g_i^2]` is
/// `(1/p_i) p_i = 1` for every coordinate (at points where the rare term is
/// in its linear regime).
///
/// Sampled gradients are not almost-surely bounded in any useful sense, so
/// [`StochasticObjective::grad_bound`] reports a heuristic value: the sup of
/// the expected gradient plus the largest event weight.
#[derive(Debug, Clone)]
pub struct ToyProblem {
    probs: Vec<f64>,
    weights: Vec<f64>,
    draws: Vec<Bernoulli>,
    profiles: Vec<HuberProfile>,
}

impl Default for ToyProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl ToyProblem {
    pub fn new() -> Self {
        Self::with_probabilities((1..=6).map(|i| 10f64.powi(-i)).collect())
    }

    /// Same construction with arbitrary per-coordinate event probabilities.
    ///
    /// # Panics
    ///
    /// If a probability lies outside `(0, 1)`.
    pub fn with_probabilities(probs: Vec<f64>) -> Self {
        assert!(probs.iter().all(|&p| p > 0.0 && p < 1.0), "probabilities must lie in (0, 1)");
        let weights = probs.iter().map(|p| 1.0 / p.sqrt()).collect();
        let draws = probs.iter().map(|&p| Bernoulli::new(p).expect("p in (0, 1)")).collect();
        let profiles = probs
            .iter()
            .map(|&p| HuberProfile::new(vec![HuberTerm::new(1.0 - p, 1.0), HuberTerm::new(p.sqrt(), -1.0)]))
            .collect();
        Self { probs, weights, draws, profiles }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Rare-event weights `1/sqrt(p_i)`.
    pub fn event_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Gradient of `f` for a fixed outcome of the events.
    pub fn grad_given(&self, x: &[f64], events: &[bool], out: &mut [f64]) {
        for i in 0..self.dim() {
            out[i] = if events[i] { self.weights[i] * huber(x[i] + 1.0).1 } else { huber(x[i] - 1.0).1 };
        }
    }

    /// Exact `(F(x), grad F(x))`.
    pub fn expected(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let grad = self.profiles.iter().zip(x).map(|(p, &xi)| p.deriv(xi)).collect();
        (self.true_value(x), grad)
    }

    /// Exact per-coordinate `Var[grad_i f(x)]`.
    pub fn variance(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let p = self.probs[i];
                let common = huber(x[i] - 1.0).1;
                let rare = self.weights[i] * huber(x[i] + 1.0).1;
                let mean = (1.0 - p) * common + p * rare;
                let second = (1.0 - p) * common * common + p * rare * rare;
                second - mean * mean
            })
            .collect()
    }

    /// Rare-event contribution `p_i * (1/sqrt(p_i))^2` to `E[g_i^2]` per unit
    /// of `huber'(x_i + 1)^2`.
    pub fn rare_second_moment_weights(&self) -> Vec<f64> {
        self.probs.iter().zip(&self.weights).map(|(p, w)| p * w * w).collect()
    }
}

impl StochasticObjective for ToyProblem {
    fn dim(&self) -> usize {
        self.probs.len()
    }

    fn sample_grad<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R, out: &mut [f64]) {
        for i in 0..self.probs.len() {
            out[i] =
                if self.draws[i].sample(rng) { self.weights[i] * huber(x[i] + 1.0).1 } else { huber(x[i] - 1.0).1 };
        }
    }

    fn true_grad(&self, x: &[f64], out: &mut [f64]) {
        for ((o, p), &xi) in out.iter_mut().zip(&self.profiles).zip(x) {
            *o = p.deriv(xi);
        }
    }

    fn true_value(&self, x: &[f64]) -> f64 {
        self.profiles.iter().zip(x).map(|(p, &xi)| p.value(xi)).sum()
    }

    fn f_star(&self) -> f64 {
        self.profiles.iter().map(HuberProfile::inf).sum()
    }

    fn grad_bound(&self) -> Option<f64> {
        let expected = self.profiles.iter().map(HuberProfile::sup_abs_deriv).fold(0.0, f64::max);
        let largest = self.weights.iter().copied().fold(0.0, f64::max);
        Some(expected + largest)
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.profiles.iter().map(HuberProfile::lipschitz).fold(0.0, f64::max))
    }
}
