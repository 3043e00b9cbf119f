//! Randomized and enumerative verification suites behind `verify`.

use std::path::Path;

use adaconv_core::bounds::Theorem;
use adaconv_core::lemma_lab::{
    check_descent_lemma, check_momentum_sum_ratio, check_sum_ratio, check_theorem_bound, exact_trajectory_expectations,
    geom_index_closed_form, geometric_tail_checks, theorem_applies, DescentInstance, EnumerationReport,
    MomentumSequenceInstance, SequenceInstance, EQUALITY_RTOL, INEQUALITY_SLACK,
};
use adaconv_core::{
    stream_rng, Algorithm, Atom, FiniteSupportObjective, HuberTerm, HyperParams, StochasticObjective, StreamRng,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

pub const DEFAULT_VERIFY_SEED: u64 = 0x1e44a;

/// Instance counts of the `verify lemmas` suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SuiteSizes {
    pub geom_index: usize,
    pub sum_ratio: usize,
    pub momentum_sum_ratio: usize,
    pub geometric_tail: usize,
    pub descent: usize,
    pub enumeration: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self {
            geom_index: 1_000,
            sum_ratio: 10_000,
            momentum_sum_ratio: 10_000,
            geometric_tail: 10_000,
            descent: 100,
            enumeration: 40,
        }
    }
}

/// Aggregate over all instances of one check.
///
/// `min_margin` is the smallest distance by which a check held, measured in
/// the direction of the inequality; negative values are violations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tally {
    pub check: String,
    pub instances: usize,
    pub violations: usize,
    pub max_violation: f64,
    pub min_margin: f64,
}

impl Tally {
    pub fn new(check: &str) -> Self {
        Self { check: check.into(), instances: 0, violations: 0, max_violation: 0.0, min_margin: f64::INFINITY }
    }

    fn record(&mut self, holds: bool, margin: f64) {
        self.instances += 1;
        self.min_margin = self.min_margin.min(margin);
        if !holds {
            self.violations += 1;
            self.max_violation = self.max_violation.max(-margin);
        }
    }

    /// Records a check of `lhs <= rhs`.
    pub fn at_most(&mut self, lhs: f64, rhs: f64, holds: bool) {
        self.record(holds, rhs - lhs);
    }

    /// Records a check of `lhs >= rhs`.
    pub fn at_least(&mut self, lhs: f64, rhs: f64, holds: bool) {
        self.record(holds, lhs - rhs);
    }

    /// Records an equality check by its relative gap.
    pub fn equal(&mut self, a: f64, b: f64) {
        let scale = a.abs().max(b.abs());
        let gap = if scale == 0.0 { 0.0 } else { (a - b).abs() / scale };
        self.record(gap <= EQUALITY_RTOL, EQUALITY_RTOL - gap);
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.instances > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub sizes: SuiteSizes,
    pub checks: Vec<Tally>,
    pub all_hold: bool,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&Tally> {
        self.checks.iter().find(|t| t.check == name)
    }
}

fn log_uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..=hi.ln())).exp()
}

/// Closed form of `sum_{q=i}^{Q} a^q q` against direct summation.
pub fn geom_index_suite(rng: &mut StreamRng, count: usize) -> Result<Vec<Tally>, HarnessError> {
    let mut exact = Tally::new("geom_index_closed_form");
    let mut bound = Tally::new("geom_index_bound");
    for _ in 0..count {
        let a = rng.gen_range(0.05..=0.99);
        let q = rng.gen_range(0..=200u64);
        let i = rng.gen_range(0..=q);
        let c = geom_index_closed_form(a, i, q)?;
        exact.equal(c.brute, c.closed);
        if i == 0 {
            bound.at_most(c.brute, c.bound, c.brute <= c.bound + INEQUALITY_SLACK);
        }
    }
    Ok(vec![exact, bound])
}

fn random_sequence(rng: &mut StreamRng, signed: bool) -> Vec<f64> {
    let len = rng.gen_range(1..=100);
    (0..len)
        .map(|_| {
            let v = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..=10.0) };
            if signed && rng.gen_bool(0.5) {
                -v
            } else {
                v
            }
        })
        .collect()
}

fn random_beta2(rng: &mut StreamRng) -> f64 {
    if rng.gen_bool(0.2) {
        1.0
    } else {
        rng.gen_range(0.5..1.0)
    }
}

/// Sum of ratios with decayed-sum denominators, on non-negative sequences.
pub fn sum_ratio_suite(rng: &mut StreamRng, count: usize) -> Result<Tally, HarnessError> {
    let mut tally = Tally::new("sum_ratio");
    for _ in 0..count {
        let inst = SequenceInstance {
            a: random_sequence(rng, false),
            beta2: random_beta2(rng),
            epsilon: log_uniform(rng, 1e-8, 1.0),
        };
        let c = check_sum_ratio(&inst)?;
        tally.at_most(c.lhs, c.rhs, c.holds);
    }
    Ok(tally)
}

/// Squared decayed sums over decayed sums of squares, on signed sequences.
pub fn momentum_sum_ratio_suite(rng: &mut StreamRng, count: usize) -> Result<Tally, HarnessError> {
    let mut tally = Tally::new("momentum_sum_ratio");
    for _ in 0..count {
        let beta2 = random_beta2(rng);
        let inst = MomentumSequenceInstance {
            a: random_sequence(rng, true),
            beta1: rng.gen_range(1e-6..0.999) * beta2,
            beta2,
            epsilon: log_uniform(rng, 1e-8, 1.0),
        };
        let c = check_momentum_sum_ratio(&inst)?;
        tally.at_most(c.lhs, c.rhs, c.holds);
    }
    Ok(tally)
}

/// Geometric sums weighted by `sqrt(q + 1)` and `sqrt(q) (q + 1)`.
pub fn geometric_tail_suite(rng: &mut StreamRng, count: usize) -> Result<Vec<Tally>, HarnessError> {
    let mut tight = Tally::new("geometric_sqrt_tail_tight");
    let mut sqrt = Tally::new("geometric_sqrt_tail");
    let mut pow32 = Tally::new("geometric_pow32_tail");
    for _ in 0..count {
        let a = rng.gen_range(0.01..=0.99);
        let q = rng.gen_range(1..=10_000u64);
        let r = geometric_tail_checks(a, q)?;
        tight.at_most(r.sqrt_sum, r.sqrt_bound_tight, r.sqrt_sum <= r.sqrt_bound_tight + INEQUALITY_SLACK);
        sqrt.at_most(r.sqrt_sum, r.sqrt_bound, r.sqrt_sum <= r.sqrt_bound + INEQUALITY_SLACK);
        pow32.at_most(r.pow32_sum, r.pow32_bound, r.pow32_sum <= r.pow32_bound + INEQUALITY_SLACK);
    }
    Ok(vec![tight, sqrt, pow32])
}

fn random_probs(rng: &mut StreamRng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let s: f64 = p.iter().sum();
    p[0] += 1.0 - s;
    p
}

/// Single-step descent lemma of the adaptive update, by exact expectation.
pub fn descent_suite(rng: &mut StreamRng, count: usize) -> Result<Tally, HarnessError> {
    let mut tally = Tally::new("descent");
    for _ in 0..count {
        let k = rng.gen_range(1..=5);
        let epsilon = log_uniform(rng, 1e-8, 1.0);
        let r = epsilon.sqrt() + rng.gen_range(0.01..5.0);
        let cap = r - epsilon.sqrt();
        let support = random_probs(rng, k).into_iter().map(|p| (p, rng.gen_range(-cap..=cap))).collect();
        let v_prev = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..10.0) };
        let inst = DescentInstance { support, v_prev, beta2: random_beta2(rng), epsilon, r };
        let c = check_descent_lemma(&inst)?;
        tally.at_least(c.lhs, c.rhs, c.holds);
    }
    Ok(tally)
}

/// A random Huber-based objective with `atoms` atoms in `d` dimensions.
pub fn random_finite_objective(
    rng: &mut StreamRng,
    atoms: usize,
    d: usize,
) -> Result<FiniteSupportObjective, HarnessError> {
    let atoms = random_probs(rng, atoms)
        .into_iter()
        .map(|prob| Atom {
            prob,
            terms: (0..d)
                .map(|_| {
                    (0..rng.gen_range(1..=2))
                        .map(|_| HuberTerm::new(rng.gen_range(0.2..2.0), rng.gen_range(-2.0..2.0)))
                        .collect()
                })
                .collect(),
        })
        .collect();
    Ok(FiniteSupportObjective::new(atoms)?)
}

fn record_enumeration(tallies: &mut [Tally; 3], rep: &EnumerationReport) {
    for c in &rep.descent {
        tallies[0].at_least(c.lhs, c.rhs, c.holds);
    }
    for c in &rep.momentum_descent {
        tallies[1].at_least(c.lhs, c.rhs, c.holds);
    }
    for c in &rep.momentum_norm {
        tallies[2].at_most(c.lhs, c.rhs, c.holds);
    }
}

/// Per-iteration descent and momentum lemmas on exactly enumerated trajectories.
pub fn enumeration_suite(rng: &mut StreamRng, count: usize) -> Result<Vec<Tally>, HarnessError> {
    let mut tallies = [Tally::new("trajectory_descent"), Tally::new("momentum_descent"), Tally::new("momentum_norm")];
    for i in 0..count {
        let algorithm = if i % 2 == 0 { Algorithm::Adaptive } else { Algorithm::SgdHb };
        let k = rng.gen_range(2..=3);
        let d = rng.gen_range(1..=2);
        let n = rng.gen_range(2..=6);
        let obj = random_finite_objective(rng, k, d)?;
        let x0: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let beta2 = if rng.gen_bool(0.3) { 1.0 } else { rng.gen_range(0.8..1.0) };
        let beta1 = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..0.95) * beta2 };
        let alpha = log_uniform(rng, 1e-3, 1.0);
        let h = HyperParams::new(alpha, beta1, beta2, log_uniform(rng, 1e-8, 1e-2))?;
        let rep = exact_trajectory_expectations(&obj, &x0, &h, algorithm, n)?;
        record_enumeration(&mut tallies, &rep);
    }
    Ok(tallies.into_iter().filter(|t| t.instances > 0).collect())
}

/// Runs every randomized and enumerative lemma check.
pub fn verify_lemmas(seed: u64, sizes: SuiteSizes) -> Result<VerifyReport, HarnessError> {
    let mut checks = Vec::new();
    checks.extend(geom_index_suite(&mut stream_rng(seed, 0), sizes.geom_index)?);
    checks.push(sum_ratio_suite(&mut stream_rng(seed, 1), sizes.sum_ratio)?);
    checks.push(momentum_sum_ratio_suite(&mut stream_rng(seed, 2), sizes.momentum_sum_ratio)?);
    checks.extend(geometric_tail_suite(&mut stream_rng(seed, 3), sizes.geometric_tail)?);
    checks.push(descent_suite(&mut stream_rng(seed, 4), sizes.descent)?);
    checks.extend(enumeration_suite(&mut stream_rng(seed, 5), sizes.enumeration)?);
    let grid = BoundsGridConfig::dominance_default();
    checks.push(verify_bounds(&grid)?.tally);
    let all_hold = checks.iter().all(Tally::passed);
    Ok(VerifyReport { seed, sizes, checks, all_hold })
}

/// Grid over which exact expectations are compared with the theorem bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsGridConfig {
    pub objective: FiniteSupportObjective,
    pub x0: Vec<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: Vec<f64>,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    #[serde(default = "all_theorems")]
    pub theorems: Vec<Theorem>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn all_theorems() -> Vec<Theorem> {
    Theorem::ALL.to_vec()
}

fn default_epsilon() -> f64 {
    1e-8
}

impl BoundsGridConfig {
    /// Two atoms in one dimension, eight steps, the 27-point grid
    /// `alpha x beta1 x beta2 = {1e-2, 1e-1, 1} x {0, 0.5, 0.9} x {0.95, 0.999, 1}`.
    pub fn dominance_default() -> Self {
        Self {
            objective: FiniteSupportObjective::toy_coordinate(0.3).expect("valid probability"),
            x0: vec![3.0],
            n: 8,
            alpha: vec![1e-2, 1e-1, 1.0],
            beta1: vec![0.0, 0.5, 0.9],
            beta2: vec![0.95, 0.999, 1.0],
            theorems: all_theorems(),
            epsilon: default_epsilon(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.x0.len() != self.objective.dim() {
            return Err(HarnessError::Config(format!(
                "x0: length {} does not match objective dimension {}",
                self.x0.len(),
                self.objective.dim()
            )));
        }
        if self.n == 0 {
            return Err(HarnessError::Config("N: must be positive".into()));
        }
        for (name, grid) in [("alpha", &self.alpha), ("beta1", &self.beta1), ("beta2", &self.beta2)] {
            if grid.is_empty() {
                return Err(HarnessError::Config(format!("{name}: grid is empty")));
            }
        }
        Ok(())
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCase {
    pub theorem: Theorem,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub exact_lhs: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub tally: Tally,
    /// Applicable points whose horizon is too short for the bound to make a claim.
    pub skipped_invalid_horizon: usize,
    pub not_applicable: usize,
    pub checked_per_theorem: Vec<(Theorem, usize)>,
    pub cases: Vec<BoundCase>,
}

/// Compares exact `E|grad F(x_tau)|^2` with every applicable theorem bound.
pub fn verify_bounds(cfg: &BoundsGridConfig) -> Result<BoundsReport, HarnessError> {
    cfg.validate()?;
    let mut tally = Tally::new("theorem_dominance");
    let mut skipped = 0;
    let mut not_applicable = 0;
    let mut cases = Vec::new();
    let mut per_theorem = Vec::new();
    for &theorem in &cfg.theorems {
        let mut checked = 0;
        for &alpha in &cfg.alpha {
            for &beta1 in &cfg.beta1 {
                for &beta2 in &cfg.beta2 {
                    let Ok(h) = HyperParams::new(alpha, beta1, beta2, cfg.epsilon) else {
                        not_applicable += 1;
                        continue;
                    };
                    if !theorem_applies(theorem, &h) {
                        not_applicable += 1;
                        continue;
                    }
                    let c = check_theorem_bound(&cfg.objective, &cfg.x0, &h, theorem, cfg.n)?;
                    if !c.bound.valid {
                        skipped += 1;
                        continue;
                    }
                    checked += 1;
                    tally.at_most(c.exact_lhs, c.bound.total, c.holds);
                    cases.push(BoundCase {
                        theorem,
                        alpha,
                        beta1,
                        beta2,
                        exact_lhs: c.exact_lhs,
                        bound: c.bound.total,
                        holds: c.holds,
                    });
                }
            }
        }
        per_theorem.push((theorem, checked));
    }
    Ok(BoundsReport {
        tally,
        skipped_invalid_horizon: skipped,
        not_applicable,
        checked_per_theorem: per_theorem,
        cases,
    })
}
