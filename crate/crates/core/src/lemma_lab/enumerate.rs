//! Exact expectations along every trajectory of a finite-support objective.
//!
//! With `K` atoms and horizon `N` there are `K^N` equally structured paths.
//! A depth-first walk carries each node's probability and optimizer state
//! and returns, per node, the conditional expectations of the future
//! squared gradients needed by the momentum descent lemma.

use rayon::prelude::*;
use serde::Serialize;

use super::descent::descent_sides;
use super::InequalityCheck;
use crate::error::{check_dim, Error, Result};
use crate::objectives::{Atom, FiniteSupportObjective, StochasticObjective};
use crate::optim::{step_size, Algorithm, HyperParams, OptimizerState, SgdState};
use crate::sampler::tau_weights;

/// Largest number of paths enumerated in one call.
pub const MAX_PATHS: usize = 1_000_000;

/// Subtrees below this many prefix nodes are walked on a single thread.
const PARALLEL_PREFIXES: usize = 64;

/// One side-by-side comparison at iteration `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationCheck {
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl IterationCheck {
    fn new(n: usize, check: InequalityCheck) -> Self {
        Self { n, lhs: check.lhs, rhs: check.rhs, holds: check.holds }
    }
}

/// Exact expectations over all paths of length `N`.
///
/// Vectors indexed by iteration use `n - 1` for `n = 1..=N`, and
/// `grad_norm_sq[j]` is `E ||grad F(x_j)||^2` for `j = 0..N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumerationReport {
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub path_count: u64,
    pub total_probability: f64,
    pub expected_final_value: f64,
    pub grad_norm_sq: Vec<f64>,
    /// `E ||grad F(x_tau)||^2` under the momentum-aware iterate distribution.
    pub grad_norm_sq_tau: f64,
    pub m_norm_sq: Vec<f64>,
    /// Adaptive only: the momentum-free descent inequality, summed over
    /// coordinates and taken in expectation over the prefix.
    pub descent: Vec<IterationCheck>,
    /// Momentum descent inequality: adaptive or SGD version.
    pub momentum_descent: Vec<IterationCheck>,
    /// SGD only: `E ||m_n||^2 <= (R^2 + sigma^2)/(1 - beta1)^2`.
    pub momentum_norm: Vec<IterationCheck>,
}

impl EnumerationReport {
    pub fn all_hold(&self) -> bool {
        self.descent.iter().chain(&self.momentum_descent).chain(&self.momentum_norm).all(|c| c.holds)
    }

    /// Largest amount by which any lemma check is violated (0 if all hold).
    pub fn max_violation(&self) -> f64 {
        self.descent
            .iter()
            .chain(&self.momentum_descent)
            .chain(&self.momentum_norm)
            .filter(|c| !c.holds)
            .map(|c| (c.lhs - c.rhs).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone)]
enum PathState {
    Adaptive(OptimizerState),
    Sgd(SgdState),
}

impl PathState {
    fn x(&self) -> &[f64] {
        match self {
            PathState::Adaptive(s) => &s.x,
            PathState::Sgd(s) => &s.x,
        }
    }

    fn m(&self) -> &[f64] {
        match self {
            PathState::Adaptive(s) => &s.m,
            PathState::Sgd(s) => &s.m,
        }
    }
}

struct Child {
    prob: f64,
    grad: Vec<f64>,
    state: PathState,
}

/// Running sums over nodes, weighted by path probability.
#[derive(Clone)]
struct Acc {
    paths: u64,
    total_prob: f64,
    final_value: f64,
    grad_sq: Vec<f64>,
    m_sq: Vec<f64>,
    u_sq: Vec<f64>,
    big_u_sq: Vec<f64>,
    descent_lhs: Vec<f64>,
    descent_rhs: Vec<f64>,
    momentum_lhs: Vec<f64>,
    recentred: Vec<f64>,
}

impl Acc {
    fn new(n: usize) -> Self {
        let z = vec![0.0; n];
        Self {
            paths: 0,
            total_prob: 0.0,
            final_value: 0.0,
            grad_sq: z.clone(),
            m_sq: z.clone(),
            u_sq: z.clone(),
            big_u_sq: z.clone(),
            descent_lhs: z.clone(),
            descent_rhs: z.clone(),
            momentum_lhs: z.clone(),
            recentred: z,
        }
    }

    fn merge(&mut self, other: &Acc) {
        self.paths += other.paths;
        self.total_prob += other.total_prob;
        self.final_value += other.final_value;
        for (dst, src) in [
            (&mut self.grad_sq, &other.grad_sq),
            (&mut self.m_sq, &other.m_sq),
            (&mut self.u_sq, &other.u_sq),
            (&mut self.big_u_sq, &other.big_u_sq),
            (&mut self.descent_lhs, &other.descent_lhs),
            (&mut self.descent_rhs, &other.descent_rhs),
            (&mut self.momentum_lhs, &other.momentum_lhs),
            (&mut self.recentred, &other.recentred),
        ] {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += b;
            }
        }
    }
}

struct Walker<'a> {
    obj: &'a FiniteSupportObjective,
    atoms: Vec<(f64, &'a Atom)>,
    h: HyperParams,
    algorithm: Algorithm,
    horizon: usize,
    d: usize,
    /// Adaptive `R`, i.e. the sampled-gradient bound plus `sqrt(epsilon)`.
    r: f64,
    split_depth: usize,
    beta2_pow: Vec<f64>,
    beta1_pow: Vec<f64>,
}

impl Walker<'_> {
    fn children(&self, state: &PathState) -> Result<Vec<Child>> {
        self.atoms
            .iter()
            .map(|&(prob, atom)| {
                let mut grad = vec![0.0; self.d];
                atom.grad(state.x(), &mut grad);
                let mut next = state.clone();
                match &mut next {
                    PathState::Adaptive(s) => s.step(&self.h, &grad)?,
                    PathState::Sgd(s) => s.step(self.h.alpha(), self.h.beta1(), &grad)?,
                }
                Ok(Child { prob, grad, state: next })
            })
            .collect()
    }

    fn adaptive(&self) -> bool {
        self.algorithm == Algorithm::Adaptive
    }

    /// Walks the subtree rooted at a node of depth `t`.
    ///
    /// Returns `S[(n - t - 1) d + i] = E[sum_{j=t+1}^{n} beta2^(n-j) g_{j,i}^2 | node]`
    /// for `n = t+1..=N` (empty for SGD).
    fn visit(&self, t: usize, state: &PathState, prob: f64, acc: &mut Acc) -> Result<Vec<f64>> {
        if t == self.horizon {
            acc.paths += 1;
            acc.total_prob += prob;
            acc.final_value += prob * self.obj.true_value(state.x());
            return Ok(Vec::new());
        }
        let kids = self.children(state)?;
        if t < self.split_depth {
            let results: Vec<(Acc, Vec<f64>)> = kids
                .par_iter()
                .map(|c| {
                    let mut sub = Acc::new(self.horizon);
                    let s = self.visit(t + 1, &c.state, prob * c.prob, &mut sub)?;
                    Ok((sub, s))
                })
                .collect::<Result<_>>()?;
            let mut results = results.into_iter();
            self.node(t, state, prob, &kids, acc, |_, acc| {
                let (sub, s) = results.next().expect("one result per child");
                acc.merge(&sub);
                Ok(s)
            })
        } else {
            self.node(t, state, prob, &kids, acc, |k, acc| self.visit(t + 1, &kids[k].state, prob * kids[k].prob, acc))
        }
    }

    /// Adds the contributions of a non-leaf node at depth `t` and of the
    /// steps to its children; `subtree` walks child `k`.
    fn node<F>(
        &self,
        t: usize,
        state: &PathState,
        prob: f64,
        kids: &[Child],
        acc: &mut Acc,
        mut subtree: F,
    ) -> Result<Vec<f64>>
    where
        F: FnMut(usize, &mut Acc) -> Result<Vec<f64>>,
    {
        let d = self.d;
        let eps = self.h.epsilon();
        let mut big_g = vec![0.0; d];
        self.obj.true_grad(state.x(), &mut big_g);
        acc.grad_sq[t] += prob * norm_sq(&big_g);

        let remaining = self.horizon - t;
        let mut s_out = if self.adaptive() { vec![0.0; remaining * d] } else { Vec::new() };

        if let PathState::Adaptive(s) = state {
            let mut support = vec![(0.0, 0.0); kids.len()];
            for i in 0..d {
                for (slot, c) in support.iter_mut().zip(kids) {
                    *slot = (c.prob, c.grad[i]);
                }
                let check = descent_sides(&support, s.v[i], self.h.beta2(), eps, self.r);
                acc.descent_lhs[t] += prob * check.lhs;
                acc.descent_rhs[t] += prob * check.rhs;
            }
        }

        for (k, c) in kids.iter().enumerate() {
            let pc = prob * c.prob;
            let m = c.state.m();
            acc.m_sq[t] += pc * norm_sq(m);
            match &c.state {
                PathState::Adaptive(s) => {
                    let (mut u, mut big_u, mut lhs) = (0.0, 0.0, 0.0);
                    for i in 0..d {
                        let denom = (eps + s.v[i]).sqrt();
                        u += (s.m[i] / denom).powi(2);
                        big_u += (c.grad[i] / denom).powi(2);
                        lhs += big_g[i] * s.m[i] / denom;
                    }
                    acc.u_sq[t] += pc * u;
                    acc.big_u_sq[t] += pc * big_u;
                    acc.momentum_lhs[t] += pc * lhs;
                }
                PathState::Sgd(s) => {
                    acc.momentum_lhs[t] += pc * big_g.iter().zip(&s.m).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            let s_child = subtree(k, acc)?;
            if self.adaptive() {
                for off in 0..remaining {
                    for i in 0..d {
                        let later = if off > 0 { s_child[(off - 1) * d + i] } else { 0.0 };
                        s_out[off * d + i] += c.prob * (self.beta2_pow[off] * c.grad[i] * c.grad[i] + later);
                    }
                }
            }
        }

        if let PathState::Adaptive(s) = state {
            // node at depth t holds G_{n-k} with k = n - t - 1
            for off in 0..remaining {
                let decay = self.beta2_pow[off + 1];
                let term: f64 =
                    (0..d).map(|i| big_g[i] * big_g[i] / (eps + decay * s.v[i] + s_out[off * d + i]).sqrt()).sum();
                acc.recentred[t + off] += prob * self.beta1_pow[off] * term;
            }
        }
        Ok(s_out)
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Enumerates every path of `n_steps` iterations from `x0` and returns exact
/// expectations together with both sides of the descent lemmas at every
/// iteration.
pub fn exact_trajectory_expectations(
    obj: &FiniteSupportObjective,
    x0: &[f64],
    h: &HyperParams,
    algorithm: Algorithm,
    n_steps: usize,
) -> Result<EnumerationReport> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let d = obj.dim();
    check_dim(d, x0.len())?;
    let k = obj.atom_count();
    let paths = (k as f64).powi(n_steps as i32);
    if paths > MAX_PATHS as f64 {
        return Err(Error::TooManyPaths { paths, limit: MAX_PATHS });
    }
    let mut split_depth = 0;
    while split_depth < n_steps && k.pow(split_depth as u32) < PARALLEL_PREFIXES && k > 1 {
        split_depth += 1;
    }
    let walker = Walker {
        obj,
        atoms: obj.enumerate_atoms().collect(),
        h: *h,
        algorithm,
        horizon: n_steps,
        d,
        r: obj.adaptive_r(h.epsilon()),
        split_depth,
        beta2_pow: (0..=n_steps).map(|j| h.beta2().powi(j as i32)).collect(),
        beta1_pow: (0..=n_steps).map(|j| h.beta1().powi(j as i32)).collect(),
    };
    let root = match algorithm {
        Algorithm::Adaptive => PathState::Adaptive(OptimizerState::new(x0.to_vec())),
        Algorithm::SgdHb => PathState::Sgd(SgdState::new(x0.to_vec())),
    };
    let mut acc = Acc::new(n_steps);
    walker.visit(0, &root, 1.0, &mut acc)?;

    let grad_norm_sq_tau = tau_weights(n_steps, h.beta1())?.weighted_mean(&acc.grad_sq)?;
    let smooth = obj.smoothness().unwrap_or(0.0);
    let beta1 = h.beta1();
    let mut descent = Vec::new();
    let mut momentum_descent = Vec::with_capacity(n_steps);
    let mut momentum_norm = Vec::new();
    match algorithm {
        Algorithm::Adaptive => {
            let r = walker.r;
            let ratio = beta1 / h.beta2();
            for n in 1..=n_steps {
                descent.push(IterationCheck::new(
                    n,
                    InequalityCheck::at_least(acc.descent_lhs[n - 1], acc.descent_rhs[n - 1]),
                ));
                let alpha_n = step_size(h, n as u64);
                let drift: f64 = (1..n)
                    .map(|l| {
                        acc.u_sq[n - l - 1] * (l..n).map(|k| beta1.powi(k as i32) * (k as f64).sqrt()).sum::<f64>()
                    })
                    .sum();
                let noise: f64 =
                    (0..n).map(|k| ratio.powi(k as i32) * ((k + 1) as f64).sqrt() * acc.big_u_sq[n - k - 1]).sum();
                let rhs = 0.5 * acc.recentred[n - 1]
                    - alpha_n * alpha_n * smooth * smooth / (4.0 * r) * (1.0 - beta1).sqrt() * drift
                    - 3.0 * r / (1.0 - beta1).sqrt() * noise;
                momentum_descent.push(IterationCheck::new(n, InequalityCheck::at_least(acc.momentum_lhs[n - 1], rhs)));
            }
        }
        Algorithm::SgdHb => {
            let r = obj.sup_true_grad_norm();
            let sigma = obj.sup_variance_sqrt();
            let noise = r * r + sigma * sigma;
            let alpha = h.alpha();
            let penalty = alpha * smooth * beta1 * noise / (1.0 - beta1).powi(3);
            for n in 1..=n_steps {
                let recentred: f64 = (0..n).map(|k| beta1.powi(k as i32) * acc.grad_sq[n - k - 1]).sum();
                momentum_descent.push(IterationCheck::new(
                    n,
                    InequalityCheck::at_least(acc.momentum_lhs[n - 1], recentred - penalty),
                ));
                momentum_norm.push(IterationCheck::new(
                    n,
                    InequalityCheck::at_most(acc.m_sq[n - 1], noise / (1.0 - beta1).powi(2)),
                ));
            }
        }
    }

    Ok(EnumerationReport {
        algorithm,
        horizon: n_steps,
        path_count: acc.paths,
        total_probability: acc.total_prob,
        expected_final_value: acc.final_value,
        grad_norm_sq: acc.grad_sq,
        grad_norm_sq_tau,
        m_norm_sq: acc.m_sq,
        descent,
        momentum_descent,
        momentum_norm,
    })
}
