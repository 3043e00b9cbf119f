//! The unified Adam/Adagrad recursion and SGD with heavy-ball momentum.
//!
//! For every iteration `n >= 1` and coordinate `i` the adaptive update is
//!
//! ```text
//! m[n,i] = beta1 * m[n-1,i] + g[i]
//! v[n,i] = beta2 * v[n-1,i] + g[i]^2
//! x[n,i] = x[n-1,i] - alpha_n * m[n,i] / sqrt(epsilon + v[n,i])
//! ```
//!
//! with `alpha_n` from [`step_size`]. Note that epsilon sits *inside* the
//! square root. The `1 - beta1` and `1 - beta2` factors of textbook Adam are
//! folded into `alpha_n`, together with the `sqrt(1 - beta2^n)` correction.
//! The `1 - beta1^n` bias correction of textbook Adam is not applied: keeping
//! it would make `alpha_n` non-monotonic. With `beta1 = 0.9` the two schedules
//! only differ noticeably over the first few dozen iterations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::objectives::StochasticObjective;

/// Default numerical-stability constant.
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Hyperparameters `(alpha, beta1, beta2, epsilon)` of the unified recursion.
///
/// Construction enforces `alpha > 0`, `epsilon > 0` and `0 <= beta1 < beta2 <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHyperParams", deny_unknown_fields)]
pub struct HyperParams {
    alpha: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHyperParams {
    alpha: f64,
    beta1: f64,
    beta2: f64,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl TryFrom<RawHyperParams> for HyperParams {
    type Error = Error;

    fn try_from(raw: RawHyperParams) -> Result<Self> {
        HyperParams::new(raw.alpha, raw.beta1, raw.beta2, raw.epsilon)
    }
}

impl HyperParams {
    pub fn new(alpha: f64, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidHyperParams(msg));
        if !(alpha.is_finite() && alpha > 0.0) {
            return bad(format!("alpha must be a positive finite number, got {alpha}"));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return bad(format!("epsilon must be a positive finite number, got {epsilon}"));
        }
        if !(beta2 > 0.0 && beta2 <= 1.0) {
            return bad(format!("beta2 must lie in (0, 1], got {beta2}"));
        }
        if !(0.0..1.0).contains(&beta1) {
            return bad(format!("beta1 must lie in [0, 1), got {beta1}"));
        }
        if beta1 >= beta2 {
            return bad(format!("beta1 must be strictly below beta2, got beta1 = {beta1}, beta2 = {beta2}"));
        }
        Ok(Self { alpha, beta1, beta2, epsilon })
    }

    /// Adagrad without momentum: `beta1 = 0`, `beta2 = 1`.
    pub fn adagrad(alpha: f64, epsilon: f64) -> Result<Self> {
        Self::new(alpha, 0.0, 1.0, epsilon)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// True in the Adagrad regime (`beta2 == 1`).
    pub fn is_adagrad(&self) -> bool {
        self.beta2 == 1.0
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.beta1, self.beta2, self.epsilon)
    }

    pub fn with_beta1(self, beta1: f64) -> Result<Self> {
        Self::new(self.alpha, beta1, self.beta2, self.epsilon)
    }

    pub fn with_beta2(self, beta2: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta1, beta2, self.epsilon)
    }
}

/// `1 - b^n` for `b` in `[0, 1]`, accurate when `b` is close to 1.
pub(crate) fn one_minus_pow(b: f64, n: f64) -> f64 {
    if b == 0.0 {
        return if n > 0.0 { 1.0 } else { 0.0 };
    }
    -(n * (-(1.0 - b)).ln_1p()).exp_m1()
}

/// Step size `alpha_n` for iteration `n >= 1`.
///
/// `alpha (1 - beta1) sqrt((1 - beta2^n) / (1 - beta2))` when `beta2 < 1`,
/// and the constant `alpha (1 - beta1)` in the Adagrad regime.
pub fn step_size(h: &HyperParams, n: u64) -> f64 {
    debug_assert!(n >= 1, "step sizes are indexed from 1");
    let base = h.alpha * (1.0 - h.beta1);
    if h.is_adagrad() {
        base
    } else {
        base * (one_minus_pow(h.beta2, n as f64) / (1.0 - h.beta2)).sqrt()
    }
}

/// State `(n, x, m, v)` of the adaptive recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub n: u64,
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    /// Fresh state at `x0` with `m = v = 0`.
    pub fn new(x0: Vec<f64>) -> Self {
        let d = x0.len();
        Self { n: 0, x: x0, m: vec![0.0; d], v: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// In-place form of [`adaptive_step`].
    pub fn step(&mut self, h: &HyperParams, grad: &[f64]) -> Result<()> {
        check_dim(self.dim(), grad.len())?;
        check_finite("gradient", grad)?;
        let n = self.n + 1;
        let alpha_n = step_size(h, n);
        for (((x, m), v), &g) in self.x.iter_mut().zip(&mut self.m).zip(&mut self.v).zip(grad) {
            *m = h.beta1 * *m + g;
            *v = h.beta2 * *v + g * g;
            *x -= alpha_n * *m / (h.epsilon + *v).sqrt();
        }
        self.n = n;
        Ok(())
    }
}

/// One step of the unified recursion; the input state is left untouched.
pub fn adaptive_step(state: &OptimizerState, h: &HyperParams, grad: &[f64]) -> Result<OptimizerState> {
    let mut next = state.clone();
    next.step(h, grad)?;
    Ok(next)
}

/// State `(n, x, m)` of SGD with heavy-ball momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdState {
    pub n: u64,
    pub x: Vec<f64>,
    pub m: Vec<f64>,
}

impl SgdState {
    pub fn new(x0: Vec<f64>) -> Self {
        let d = x0.len();
        Self { n: 0, x: x0, m: vec![0.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// In-place form of [`sgd_hb_step`].
    pub fn step(&mut self, alpha: f64, beta1: f64, grad: &[f64]) -> Result<()> {
        check_sgd_params(alpha, beta1)?;
        check_dim(self.dim(), grad.len())?;
        check_finite("gradient", grad)?;
        for ((x, m), &g) in self.x.iter_mut().zip(&mut self.m).zip(grad) {
            *m = beta1 * *m + g;
            *x -= alpha * *m;
        }
        self.n += 1;
        Ok(())
    }
}

fn check_sgd_params(alpha: f64, beta1: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidHyperParams(format!("alpha must be positive, got {alpha}")));
    }
    if !(0.0..1.0).contains(&beta1) {
        return Err(Error::InvalidHyperParams(format!("beta1 must lie in [0, 1), got {beta1}")));
    }
    Ok(())
}

/// `m' = beta1 m + g`, `x' = x - alpha m'`.
pub fn sgd_hb_step(state: &SgdState, alpha: f64, beta1: f64, grad: &[f64]) -> Result<SgdState> {
    let mut next = state.clone();
    next.step(alpha, beta1, grad)?;
    Ok(next)
}

/// Which recursion a run drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Unified Adam/Adagrad recursion.
    Adaptive,
    /// SGD with heavy-ball momentum, using `alpha` and `beta1` only.
    SgdHb,
}

/// Final optimizer state of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FinalState {
    Adaptive(OptimizerState),
    Sgd(SgdState),
}

impl FinalState {
    pub fn x(&self) -> &[f64] {
        match self {
            FinalState::Adaptive(s) => &s.x,
            FinalState::Sgd(s) => &s.x,
        }
    }
}

/// Output of [`run_trajectory`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `||grad F(x_j)||^2` for `j = 0..N-1`, using the exact gradient.
    pub grad_norm_sq: Vec<f64>,
    pub final_state: FinalState,
}

/// Either optimizer, stepped uniformly.
#[derive(Debug, Clone)]
pub(crate) enum Stepper {
    Adaptive(OptimizerState, HyperParams),
    Sgd(SgdState, f64, f64),
}

impl Stepper {
    pub(crate) fn new(x0: Vec<f64>, h: &HyperParams, algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Adaptive => Stepper::Adaptive(OptimizerState::new(x0), *h),
            Algorithm::SgdHb => Stepper::Sgd(SgdState::new(x0), h.alpha(), h.beta1()),
        }
    }

    pub(crate) fn x(&self) -> &[f64] {
        match self {
            Stepper::Adaptive(s, _) => &s.x,
            Stepper::Sgd(s, _, _) => &s.x,
        }
    }

    pub(crate) fn step(&mut self, grad: &[f64]) -> Result<()> {
        match self {
            Stepper::Adaptive(s, h) => s.step(h, grad),
            Stepper::Sgd(s, alpha, beta1) => s.step(*alpha, *beta1, grad),
        }
    }

    pub(crate) fn into_final(self) -> FinalState {
        match self {
            Stepper::Adaptive(s, _) => FinalState::Adaptive(s),
            Stepper::Sgd(s, _, _) => FinalState::Sgd(s),
        }
    }
}

/// Runs `n_steps` iterations from `x0` with gradients drawn from `objective`.
///
/// Records the exact squared gradient norm at every iterate that precedes a
/// step, i.e. `x_0 .. x_{N-1}`. Bit-reproducible for a fixed generator state.
pub fn run_trajectory<O, R>(
    objective: &O,
    x0: &[f64],
    h: &HyperParams,
    algorithm: Algorithm,
    n_steps: usize,
    rng: &mut R,
) -> Result<Trajectory>
where
    O: StochasticObjective,
    R: Rng + ?Sized,
{
    if n_steps == 0 {
        return Err(Error::InvalidArgument("a trajectory needs at least one step".into()));
    }
    let d = objective.dim();
    check_dim(d, x0.len())?;
    check_finite("starting point", x0)?;
    let mut stepper = Stepper::new(x0.to_vec(), h, algorithm);
    let mut grad = vec![0.0; d];
    let mut full = vec![0.0; d];
    let mut grad_norm_sq = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        objective.true_grad(stepper.x(), &mut full);
        grad_norm_sq.push(full.iter().map(|g| g * g).sum());
        objective.sample_grad(stepper.x(), rng, &mut grad);
        stepper.step(&grad)?;
    }
    Ok(Trajectory { grad_norm_sq, final_state: stepper.into_final() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{FiniteSupportObjective, ToyProblem};
    use crate::rng::stream_rng;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn hyperparams_reject_bad_values() {
        assert!(HyperParams::new(0.0, 0.0, 1.0, 1e-8).is_err());
        assert!(HyperParams::new(0.1, 0.0, 1.0, 0.0).is_err());
        assert!(HyperParams::new(0.1, 0.5, 0.5, 1e-8).is_err());
        assert!(HyperParams::new(0.1, 0.6, 0.5, 1e-8).is_err());
        assert!(HyperParams::new(0.1, 0.0, 0.0, 1e-8).is_err());
        assert!(HyperParams::new(0.1, 0.0, 1.1, 1e-8).is_err());
        assert!(HyperParams::new(0.1, -0.1, 1.0, 1e-8).is_err());
        assert!(HyperParams::new(f64::NAN, 0.0, 1.0, 1e-8).is_err());
        assert!(HyperParams::new(0.1, 0.9, 1.0, 1e-8).is_ok());
    }

    #[test]
    fn step_size_examples() {
        let adagrad = HyperParams::new(0.1, 0.0, 1.0, 1e-8).unwrap();
        assert_eq!(step_size(&adagrad, 7), 0.1);
        let h = HyperParams::new(1.0, 0.0, 0.5, 1e-8).unwrap();
        assert!(close(step_size(&h, 1), 1.0, 1e-15));
        // sqrt((1 - 0.999^1e6) / 0.001); 0.999^1e6 underflows to ~1e-435.
        let h = HyperParams::new(1.0, 0.0, 0.999, 1e-8).unwrap();
        assert!((step_size(&h, 1_000_000) - 31.622776601683793).abs() < 1e-3);
        let h = HyperParams::new(1.0, 0.5, 1.0, 1e-8).unwrap();
        assert_eq!(step_size(&h, 3), 0.5);
    }

    #[test]
    fn adagrad_limit_of_step_size_is_not_continuous() {
        // beta2 -> 1^- gives alpha * sqrt(n), while beta2 = 1 gives alpha.
        let near = HyperParams::new(1.0, 0.0, 1.0 - 1e-16, 1e-8).unwrap();
        assert!(close(step_size(&near, 100), 10.0, 1e-9));
        let exact = HyperParams::new(1.0, 0.0, 1.0, 1e-8).unwrap();
        assert_eq!(step_size(&exact, 100), 1.0);
    }

    #[test]
    fn first_adaptive_step_normalizes() {
        let h = HyperParams::new(0.1, 0.0, 1.0, 1e-16).unwrap();
        let s = adaptive_step(&OptimizerState::new(vec![0.0]), &h, &[3.0]).unwrap();
        assert!(close(s.x[0], -0.1, 1e-12));

        let h = HyperParams::new(0.1, 0.0, 1.0, 1e-8).unwrap();
        let s0 = OptimizerState::new(vec![0.0]);
        let s = adaptive_step(&s0, &h, &[3.0]).unwrap();
        assert_eq!(s.n, 1);
        assert_eq!(s.m, vec![3.0]);
        assert_eq!(s.v, vec![9.0]);
        assert!(close(s.x[0], -0.3 / (9.0f64 + 1e-8).sqrt(), 1e-15));
        assert!((s.x[0] + 0.099_999_999_944_444_44).abs() < 1e-16);
        assert_eq!(s0, OptimizerState::new(vec![0.0]));
    }

    #[test]
    fn adaptive_step_errors() {
        let h = HyperParams::new(0.1, 0.0, 1.0, 1e-8).unwrap();
        let s = OptimizerState::new(vec![0.0, 0.0]);
        assert!(matches!(adaptive_step(&s, &h, &[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(adaptive_step(&s, &h, &[1.0, f64::NAN]), Err(Error::NonFinite { index: 1, .. })));
    }

    #[test]
    fn beta1_zero_matches_momentum_free_recursion() {
        let h = HyperParams::new(0.05, 0.0, 0.99, 1e-8).unwrap();
        let grads = [[1.0, -2.0], [0.5, 0.25], [-3.0, 1.5], [2.0, 2.0]];
        let mut s = OptimizerState::new(vec![0.3, -0.7]);
        let (mut x, mut v) = (vec![0.3, -0.7], vec![0.0, 0.0]);
        for (n, g) in grads.iter().enumerate() {
            s.step(&h, g).unwrap();
            let a = step_size(&h, n as u64 + 1);
            for i in 0..2 {
                v[i] = 0.99 * v[i] + g[i] * g[i];
                x[i] -= a * g[i] / (1e-8 + v[i]).sqrt();
            }
            assert_eq!(s.x, x);
            assert_eq!(s.m.as_slice(), g.as_slice());
        }
    }

    #[test]
    fn sgd_hb_examples() {
        let s0 = SgdState::new(vec![1.0]);
        let s1 = sgd_hb_step(&s0, 0.1, 0.9, &[2.0]).unwrap();
        assert_eq!(s1.m, vec![2.0]);
        assert!(close(s1.x[0], 0.8, 1e-15));
        let s2 = sgd_hb_step(&s1, 0.1, 0.9, &[1.0]).unwrap();
        assert!(close(s2.m[0], 2.8, 1e-15));
        assert!(close(s2.x[0], 0.52, 1e-14));
        assert_eq!(s2.n, 2);

        let plain = sgd_hb_step(&SgdState::new(vec![1.0, 2.0]), 0.5, 0.0, &[2.0, -4.0]).unwrap();
        assert_eq!(plain.x, vec![0.0, 4.0]);

        assert!(sgd_hb_step(&s0, 0.1, 0.9, &[1.0, 2.0]).is_err());
        assert!(sgd_hb_step(&s0, 0.1, 0.9, &[f64::INFINITY]).is_err());
    }

    #[test]
    fn single_step_trajectory_records_initial_norm() {
        let obj = FiniteSupportObjective::single_quadratic(&[2.0, -1.0]);
        let h = HyperParams::new(0.1, 0.0, 1.0, 1e-8).unwrap();
        let x0 = [0.5, 0.5];
        let mut rng = stream_rng(0, 0);
        let t = run_trajectory(&obj, &x0, &h, Algorithm::Adaptive, 1, &mut rng).unwrap();
        let mut g = [0.0; 2];
        obj.true_grad(&x0, &mut g);
        assert_eq!(t.grad_norm_sq, vec![g[0] * g[0] + g[1] * g[1]]);
        assert!(run_trajectory(&obj, &x0, &h, Algorithm::Adaptive, 0, &mut rng).is_err());
    }

    #[test]
    fn trajectories_are_deterministic_per_seed() {
        let toy = ToyProblem::new();
        let h = HyperParams::new(1e-3, 0.5, 0.999, 1e-8).unwrap();
        let x0 = [0.0; 6];
        let a = run_trajectory(&toy, &x0, &h, Algorithm::Adaptive, 500, &mut stream_rng(3, 1)).unwrap();
        let b = run_trajectory(&toy, &x0, &h, Algorithm::Adaptive, 500, &mut stream_rng(3, 1)).unwrap();
        let c = run_trajectory(&toy, &x0, &h, Algorithm::Adaptive, 500, &mut stream_rng(3, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn displacement_bounded_without_momentum(
            alpha in 1e-4f64..2.0,
            beta2 in 0.5f64..=1.0,
            eps in 1e-10f64..1.0,
            grads in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 1..60),
        ) {
            let h = HyperParams::new(alpha, 0.0, beta2, eps).unwrap();
            let mut s = OptimizerState::new(vec![0.0; 3]);
            for g in &grads {
                let before = s.x.clone();
                s.step(&h, g).unwrap();
                let a = step_size(&h, s.n);
                for i in 0..3 {
                    prop_assert!((s.x[i] - before[i]).abs() <= a);
                    prop_assert!(s.v[i] >= 0.0);
                }
            }
        }

        #[test]
        fn step_size_is_non_decreasing(
            alpha in 1e-6f64..10.0,
            beta1 in 0.0f64..0.99,
            gap in 1e-9f64..1.0,
        ) {
            let beta2 = (beta1 + gap).min(1.0);
            prop_assume!(beta1 < beta2);
            let h = HyperParams::new(alpha, beta1, beta2, 1e-8).unwrap();
            let mut prev = 0.0;
            for n in (1..2000u64).chain([10_000, 100_000, 1_000_000]) {
                let a = step_size(&h, n);
                prop_assert!(a >= prev);
                prev = a;
            }
        }

        #[test]
        fn adagrad_second_moment_is_non_decreasing(
            grads in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 1..40),
            beta1 in 0.0f64..0.95,
        ) {
            let h = HyperParams::new(0.1, beta1, 1.0, 1e-8).unwrap();
            let mut s = OptimizerState::new(vec![0.0; 2]);
            for g in &grads {
                let before = s.v.clone();
                s.step(&h, g).unwrap();
                prop_assert!(s.v.iter().zip(&before).all(|(a, b)| a >= b));
            }
        }
    }

    #[test]
    fn second_moment_matches_closed_form_sum() {
        // v_n = sum_j beta2^{n-j} g_j^2, recomputed from scratch.
        let toy = ToyProblem::new();
        let h = HyperParams::new(1e-3, 0.0, 0.999, 1e-8).unwrap();
        let mut rng = stream_rng(11, 0);
        let mut s = OptimizerState::new(vec![0.0; 6]);
        let mut history: Vec<Vec<f64>> = Vec::new();
        let mut g = vec![0.0; 6];
        for _ in 0..10_000 {
            toy.sample_grad(&s.x, &mut rng, &mut g);
            history.push(g.clone());
            s.step(&h, &g).unwrap();
        }
        let n = history.len();
        for i in 0..6 {
            let direct: f64 =
                history.iter().enumerate().map(|(j, g)| 0.999f64.powi((n - 1 - j) as i32) * g[i] * g[i]).sum();
            assert!(close(s.v[i], direct, 1e-10), "coordinate {i}: {} vs {}", s.v[i], direct);
        }
    }

    #[test]
    fn second_moment_continuous_at_adagrad_limit() {
        let adagrad = HyperParams::new(0.1, 0.0, 1.0, 1e-8).unwrap();
        let near = HyperParams::new(0.1, 0.0, 1.0 - 1e-16, 1e-8).unwrap();
        let mut a = OptimizerState::new(vec![0.0; 6]);
        let mut b = a.clone();
        let toy = ToyProblem::new();
        let mut rng = stream_rng(5, 0);
        let mut g = vec![0.0; 6];
        for _ in 0..100 {
            toy.sample_grad(&a.x, &mut rng, &mut g);
            a.step(&adagrad, &g).unwrap();
            b.step(&near, &g).unwrap();
            for i in 0..6 {
                assert!(close(b.v[i], a.v[i], 1e-6));
                assert!(close(b.m[i], a.m[i], 1e-6));
            }
        }
    }
}
