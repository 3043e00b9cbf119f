//! Sweep configuration: JSON schema, defaults and validation.

use std::path::Path;

use adaconv_core::objectives::{FiniteSupportObjective, StochasticObjective, ToyProblem};
use adaconv_core::{Algorithm, HyperParams, DEFAULT_EPSILON};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// Number of points in the default grid.
pub const DEFAULT_GRID_POINTS: usize = 13;
pub const DEFAULT_ITERATIONS: u64 = 1_000_000;
pub const DEFAULT_RUNS: usize = 3;
pub const DEFAULT_MASTER_SEED: u64 = 0x5eed;
/// `1 - beta2` used by the default configurations and the warm start.
pub const DEFAULT_ONE_MINUS_BETA2: f64 = 1e-6;

/// Which objective to optimize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveSpec {
    /// Six-coordinate Huber problem with rare large gradients.
    Toy,
    FiniteSupport(FiniteSupportObjective),
}

impl ObjectiveSpec {
    pub fn build(&self) -> Objective {
        match self {
            ObjectiveSpec::Toy => Objective::Toy(ToyProblem::new()),
            ObjectiveSpec::FiniteSupport(obj) => Objective::Finite(obj.clone()),
        }
    }
}

/// Concrete objective behind an [`ObjectiveSpec`].
#[derive(Debug, Clone)]
pub enum Objective {
    Toy(ToyProblem),
    Finite(FiniteSupportObjective),
}

macro_rules! delegate {
    ($self:ident, $o:ident => $e:expr) => {
        match $self {
            Objective::Toy($o) => $e,
            Objective::Finite($o) => $e,
        }
    };
}

impl StochasticObjective for Objective {
    fn dim(&self) -> usize {
        delegate!(self, o => o.dim())
    }

    fn sample_grad<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R, out: &mut [f64]) {
        delegate!(self, o => o.sample_grad(x, rng, out))
    }

    fn true_grad(&self, x: &[f64], out: &mut [f64]) {
        delegate!(self, o => o.true_grad(x, out))
    }

    fn true_value(&self, x: &[f64]) -> f64 {
        delegate!(self, o => o.true_value(x))
    }

    fn f_star(&self) -> f64 {
        delegate!(self, o => o.f_star())
    }

    fn grad_bound(&self) -> Option<f64> {
        delegate!(self, o => o.grad_bound())
    }

    fn smoothness(&self) -> Option<f64> {
        delegate!(self, o => o.smoothness())
    }
}

/// Parameter varied across the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vary {
    Alpha,
    OneMinusBeta1,
    OneMinusBeta2,
}

/// How `E ||grad F(x_tau)||^2` is estimated from one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Exact average of `||grad F(x_j)||^2` under the iterate distribution.
    #[default]
    TauWeighted,
    /// Uniform average over `j = 0..N`.
    PlainAverage,
}

/// Hyperparameters held fixed while one of them is varied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParams {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmPhase {
    pub iterations: u64,
    pub alpha: f64,
}

/// Phases run before the measured trajectory; only the final `x` is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WarmStart {
    pub phases: Vec<WarmPhase>,
    #[serde(default)]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
}

fn default_beta2() -> f64 {
    1.0 - DEFAULT_ONE_MINUS_BETA2
}

impl WarmStart {
    /// `10^6` iterations at `alpha = 10^-4`, then `10^6` at `10^-5`.
    pub fn standard() -> Self {
        Self {
            phases: vec![
                WarmPhase { iterations: 1_000_000, alpha: 1e-4 },
                WarmPhase { iterations: 1_000_000, alpha: 1e-5 },
            ],
            beta1: 0.0,
            beta2: default_beta2(),
        }
    }
}

/// Fully resolved sweep configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub objective: ObjectiveSpec,
    pub algorithm: Algorithm,
    pub vary: Vary,
    pub grid: Vec<f64>,
    pub fixed: FixedParams,
    pub iterations: u64,
    pub runs: usize,
    pub master_seed: u64,
    pub warm_start: Option<WarmStart>,
    pub estimator: Estimator,
    pub x0: Vec<f64>,
}

/// On-disk form; every field except `vary` is optional.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweepConfig {
    #[serde(default)]
    objective: Option<ObjectiveSpec>,
    #[serde(default)]
    algorithm: Option<Algorithm>,
    vary: Vary,
    #[serde(default)]
    grid: Option<Vec<f64>>,
    #[serde(default)]
    fixed: Option<RawFixed>,
    #[serde(default)]
    iterations: Option<u64>,
    #[serde(default)]
    runs: Option<usize>,
    #[serde(default)]
    master_seed: Option<u64>,
    /// `null` disables the warm start; absent means the default for `vary`.
    #[serde(default, deserialize_with = "explicit_option")]
    warm_start: Option<Option<WarmStart>>,
    #[serde(default)]
    estimator: Option<Estimator>,
    #[serde(default)]
    x0: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixed {
    alpha: Option<f64>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    epsilon: Option<f64>,
}

fn explicit_option<'de, D, T>(de: D) -> Result<Option<Option<T>>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(de).map(Some)
}

/// `n` points evenly spaced in log scale between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
}

impl Vary {
    /// Fixed hyperparameters used when the config does not set them.
    pub fn default_fixed(self) -> FixedParams {
        let beta2 = 1.0 - DEFAULT_ONE_MINUS_BETA2;
        match self {
            Vary::Alpha => FixedParams { alpha: 1e-6, beta1: 0.0, beta2, epsilon: DEFAULT_EPSILON },
            Vary::OneMinusBeta1 => FixedParams { alpha: 1e-5, beta1: 0.0, beta2, epsilon: DEFAULT_EPSILON },
            Vary::OneMinusBeta2 => FixedParams { alpha: 1e-6, beta1: 0.0, beta2, epsilon: DEFAULT_EPSILON },
        }
    }

    pub fn default_warm_start(self) -> Option<WarmStart> {
        match self {
            Vary::Alpha | Vary::OneMinusBeta2 => Some(WarmStart::standard()),
            Vary::OneMinusBeta1 => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Vary::Alpha => "alpha",
            Vary::OneMinusBeta1 => "one_minus_beta1",
            Vary::OneMinusBeta2 => "one_minus_beta2",
        }
    }
}

impl SweepConfig {
    /// Defaults for `vary` on the toy problem.
    pub fn defaults(vary: Vary) -> Self {
        Self {
            objective: ObjectiveSpec::Toy,
            algorithm: Algorithm::Adaptive,
            vary,
            grid: log_grid(1e-6, 1.0, DEFAULT_GRID_POINTS),
            fixed: vary.default_fixed(),
            iterations: DEFAULT_ITERATIONS,
            runs: DEFAULT_RUNS,
            master_seed: DEFAULT_MASTER_SEED,
            warm_start: vary.default_warm_start(),
            estimator: Estimator::TauWeighted,
            x0: vec![0.0; ToyProblem::new().dim()],
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let raw: RawSweepConfig = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let base = Self::defaults(raw.vary);
        let fixed_raw = raw.fixed.unwrap_or_default();
        let objective = raw.objective.unwrap_or(ObjectiveSpec::Toy);
        let dim = objective.build().dim();
        let cfg = Self {
            algorithm: raw.algorithm.unwrap_or(base.algorithm),
            vary: raw.vary,
            grid: raw.grid.unwrap_or(base.grid),
            fixed: FixedParams {
                alpha: fixed_raw.alpha.unwrap_or(base.fixed.alpha),
                beta1: fixed_raw.beta1.unwrap_or(base.fixed.beta1),
                beta2: fixed_raw.beta2.unwrap_or(base.fixed.beta2),
                epsilon: fixed_raw.epsilon.unwrap_or(base.fixed.epsilon),
            },
            iterations: raw.iterations.unwrap_or(base.iterations),
            runs: raw.runs.unwrap_or(base.runs),
            master_seed: raw.master_seed.unwrap_or(base.master_seed),
            warm_start: raw.warm_start.unwrap_or(base.warm_start),
            estimator: raw.estimator.unwrap_or_default(),
            x0: raw.x0.unwrap_or_else(|| vec![0.0; dim]),
            objective,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |field: &str, msg: String| Err(HarnessError::Config(format!("{field}: {msg}")));
        if self.grid.is_empty() {
            return bad("grid", "must not be empty".into());
        }
        if let Some(v) = self.grid.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return bad("grid", format!("values must be positive and finite, got {v}"));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("grid", "values must be strictly increasing".into());
        }
        if self.runs == 0 {
            return bad("runs", "must be at least 1".into());
        }
        if self.iterations == 0 {
            return bad("iterations", "must be at least 1".into());
        }
        let f = &self.fixed;
        if !(f.epsilon.is_finite() && f.epsilon > 0.0) {
            return bad("fixed.epsilon", format!("must be positive, got {}", f.epsilon));
        }
        if !(f.alpha.is_finite() && f.alpha > 0.0) {
            return bad("fixed.alpha", format!("must be positive, got {}", f.alpha));
        }
        if !(0.0..1.0).contains(&f.beta1) {
            return bad("fixed.beta1", format!("must lie in [0, 1), got {}", f.beta1));
        }
        if !(f.beta2 > 0.0 && f.beta2 <= 1.0) {
            return bad("fixed.beta2", format!("must lie in (0, 1], got {}", f.beta2));
        }
        let dim = self.objective.build().dim();
        if self.x0.len() != dim {
            return bad("x0", format!("expected {dim} coordinates, got {}", self.x0.len()));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return bad("x0", "values must be finite".into());
        }
        if let Some(w) = &self.warm_start {
            for (k, p) in w.phases.iter().enumerate() {
                if let Err(e) = HyperParams::new(p.alpha, w.beta1, w.beta2, f.epsilon) {
                    return bad(&format!("warm_start.phases[{k}]"), e.to_string());
                }
            }
        }
        Ok(())
    }

    /// Hyperparameters at one grid value.
    pub fn params_at(&self, value: f64) -> adaconv_core::Result<HyperParams> {
        let f = &self.fixed;
        match self.vary {
            Vary::Alpha => HyperParams::new(value, f.beta1, f.beta2, f.epsilon),
            Vary::OneMinusBeta1 => HyperParams::new(f.alpha, 1.0 - value, f.beta2, f.epsilon),
            Vary::OneMinusBeta2 => HyperParams::new(f.alpha, f.beta1, 1.0 - value, f.epsilon),
        }
    }
}
