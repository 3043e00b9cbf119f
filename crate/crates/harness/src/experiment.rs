//! One grid point of a sweep: several seeded runs and their summary.

use std::time::Instant;

use adaconv_core::objectives::StochasticObjective;
use adaconv_core::{run_trajectory, stream_rng, tau_weights, HyperParams, StreamRng};
use serde::Serialize;

use crate::config::{Estimator, Objective, SweepConfig, WarmStart};
use crate::error::HarnessError;

/// Where the generator of run `run` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunSeed {
    pub master_seed: u64,
    pub stream: u64,
}

/// Summary of all runs at one grid value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub value: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Estimates of `E ||grad F(x_tau)||^2`, one per finished run.
    pub estimates: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(runs)`; 0 with a single run.
    pub stderr: f64,
    pub seeds: Vec<RunSeed>,
    /// Indices of runs that produced non-finite values.
    pub diverged: Vec<usize>,
    pub wall_clock_secs: Vec<f64>,
}

/// State after the warm start of one run: the point reached and the
/// generator, positioned after the draws the warm start consumed.
#[derive(Debug, Clone)]
pub struct WarmState {
    pub x: Vec<f64>,
    pub rng: StreamRng,
}

pub fn run_seed(cfg: &SweepConfig, run: usize) -> RunSeed {
    RunSeed { master_seed: cfg.master_seed, stream: run as u64 }
}

/// Runs the warm-start phases of run `run`. Only `x` is carried over: every
/// phase and the measured run start with fresh `m`, `v` and step counter.
pub fn warm_start(cfg: &SweepConfig, objective: &Objective, run: usize) -> Result<WarmState, HarnessError> {
    let seed = run_seed(cfg, run);
    let mut rng = stream_rng(seed.master_seed, seed.stream);
    let mut x = cfg.x0.clone();
    if let Some(WarmStart { phases, beta1, beta2 }) = &cfg.warm_start {
        for phase in phases {
            let h = HyperParams::new(phase.alpha, *beta1, *beta2, cfg.fixed.epsilon)?;
            let traj = run_trajectory(objective, &x, &h, cfg.algorithm, phase.iterations as usize, &mut rng)?;
            x = traj.final_state.x().to_vec();
        }
    }
    Ok(WarmState { x, rng })
}

/// Estimate of `E ||grad F(x_tau)||^2` from the squared gradient norms of
/// one trajectory.
pub fn estimate(grad_norm_sq: &[f64], beta1: f64, estimator: Estimator) -> Result<f64, HarnessError> {
    match estimator {
        Estimator::TauWeighted => Ok(tau_weights(grad_norm_sq.len(), beta1)?.weighted_mean(grad_norm_sq)?),
        Estimator::PlainAverage => Ok(grad_norm_sq.iter().sum::<f64>() / grad_norm_sq.len() as f64),
    }
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every seed at grid value `value`, continuing from the given warm
/// states (one per run).
pub fn run_point(
    cfg: &SweepConfig,
    objective: &Objective,
    value: f64,
    warm: &[WarmState],
) -> Result<RunResult, HarnessError> {
    let h = cfg.params_at(value)?;
    let mut estimates = Vec::with_capacity(cfg.runs);
    let mut diverged = Vec::new();
    let mut wall = Vec::with_capacity(cfg.runs);
    for (run, start) in warm.iter().enumerate() {
        let t0 = Instant::now();
        let mut rng = start.rng.clone();
        let outcome = run_trajectory(objective, &start.x, &h, cfg.algorithm, cfg.iterations as usize, &mut rng)
            .map_err(HarnessError::from)
            .and_then(|traj| {
                if traj.final_state.x().iter().any(|v| !v.is_finite()) {
                    return Ok(f64::NAN);
                }
                estimate(&traj.grad_norm_sq, h.beta1(), cfg.estimator)
            });
        wall.push(t0.elapsed().as_secs_f64());
        match outcome {
            Ok(e) if e.is_finite() => estimates.push(e),
            Ok(_) | Err(HarnessError::Core(adaconv_core::Error::NonFinite { .. })) => {
                log::warn!("run {run} at {} = {value} diverged; excluded from the mean", cfg.vary.name());
                diverged.push(run);
            }
            Err(e) => return Err(e),
        }
    }
    let (mean, stderr) = mean_and_stderr(&estimates);
    Ok(RunResult {
        value,
        alpha: h.alpha(),
        beta1: h.beta1(),
        beta2: h.beta2(),
        epsilon: h.epsilon(),
        estimates,
        mean,
        stderr,
        seeds: (0..cfg.runs).map(|r| run_seed(cfg, r)).collect(),
        diverged,
        wall_clock_secs: wall,
    })
}

/// Warm-starts every run and evaluates a single grid value.
pub fn run_experiment(cfg: &SweepConfig, value: f64) -> Result<RunResult, HarnessError> {
    let objective = cfg.objective.build();
    let warm = (0..cfg.runs).map(|r| warm_start(cfg, &objective, r)).collect::<Result<Vec<_>, _>>()?;
    run_point(cfg, &objective, value, &warm)
}

/// Plain objective value check used by diagnostics: `F(x) - F*`.
pub fn suboptimality(objective: &Objective, x: &[f64]) -> f64 {
    objective.true_value(x) - objective.f_star()
}
