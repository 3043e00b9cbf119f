//! Parallel sweep over a grid of one hyperparameter.

use std::time::Instant;

use adaconv_core::PRNG_NAME;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::SweepConfig;
use crate::error::HarnessError;
use crate::experiment::{run_point, suboptimality, warm_start, RunResult, WarmState};

/// Where the master seed of a sweep was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    #[default]
    Config,
    CommandLine,
    Environment,
}

/// One grid value: either a result or the reason it could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<RunResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub config: SweepConfig,
    pub prng: &'static str,
    pub seed_source: SeedSource,
    pub rows: Vec<SweepRow>,
    pub wall_clock_secs: f64,
}

impl SweepTable {
    /// `(x, y, yerr)` for every grid value with a finite mean.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.result.as_ref())
            .filter(|r| r.mean.is_finite())
            .map(|r| (r.value, r.mean, r.stderr))
            .collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| HarnessError::Config(format!("jobs: cannot build worker pool: {e}")))
}

/// Evaluates every grid value. Failures at single grid values are recorded
/// in their rows; rows follow grid order whatever the completion order.
pub fn sweep(cfg: &SweepConfig, jobs: Option<usize>) -> Result<SweepTable, HarnessError> {
    cfg.validate()?;
    let t0 = Instant::now();
    let objective = cfg.objective.build();
    let pool = pool(jobs)?;
    let warm: Vec<WarmState> = pool
        .install(|| (0..cfg.runs).into_par_iter().map(|r| warm_start(cfg, &objective, r)).collect::<Result<_, _>>())?;
    if cfg.warm_start.is_some() {
        for (r, w) in warm.iter().enumerate() {
            log::info!("run {r}: warm start ends at F - F* = {:e}", suboptimality(&objective, &w.x));
        }
    }
    let rows = pool.install(|| {
        cfg.grid
            .par_iter()
            .map(|&value| match run_point(cfg, &objective, value, &warm) {
                Ok(result) => {
                    log::info!("{} = {value:e}: mean {:e}", cfg.vary.name(), result.mean);
                    SweepRow { value, result: Some(result), error: None }
                }
                Err(e) => {
                    log::warn!("{} = {value:e} failed: {e}", cfg.vary.name());
                    SweepRow { value, result: None, error: Some(e.to_string()) }
                }
            })
            .collect()
    });
    Ok(SweepTable {
        config: cfg.clone(),
        prng: PRNG_NAME,
        seed_source: SeedSource::Config,
        rows,
        wall_clock_secs: t0.elapsed().as_secs_f64(),
    })
}
