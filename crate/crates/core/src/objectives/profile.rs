use serde::{Deserialize, Serialize};

use super::huber;

/// `weight * huber(x - center)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HuberTerm {
    pub weight: f64,
    pub center: f64,
}

impl HuberTerm {
    pub fn new(weight: f64, center: f64) -> Self {
        Self { weight, center }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.weight * huber(x - self.center).0
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.weight * huber(x - self.center).1
    }

    fn curvature(&self, x: f64) -> f64 {
        if (x - self.center).abs() < 1.0 {
            self.weight
        } else {
            0.0
        }
    }
}

/// A one-dimensional sum of Huber terms.
///
/// The sum is piecewise quadratic with breakpoints at `center +- 1`; its
/// derivative is piecewise linear and constant outside the outermost
/// breakpoints. All extremal quantities are therefore attained at
/// breakpoints or at interior vertices of the quadratic pieces.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct HuberProfile {
    terms: Vec<HuberTerm>,
}

impl HuberProfile {
    pub(crate) fn new(terms: Vec<HuberTerm>) -> Self {
        Self { terms }
    }

    pub(crate) fn value(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.value(x)).sum()
    }

    pub(crate) fn deriv(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.deriv(x)).sum()
    }

    fn curvature(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.curvature(x)).sum()
    }

    pub(crate) fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        breakpoints_of(self.terms.iter())
    }

    /// Exact infimum; `-inf` when the linear tails decrease without bound.
    pub(crate) fn inf(&self) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        if self.total_weight() < 0.0 {
            return f64::NEG_INFINITY;
        }
        let bps = self.breakpoints();
        let mut best = bps.iter().map(|&b| self.value(b)).fold(f64::INFINITY, f64::min);
        for w in bps.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let s = self.curvature(0.5 * (lo + hi));
            if s > 0.0 {
                let vertex = lo - self.deriv(lo) / s;
                if vertex > lo && vertex < hi {
                    best = best.min(self.value(vertex));
                }
            }
        }
        best
    }

    /// `sup_x |deriv(x)|`.
    pub(crate) fn sup_abs_deriv(&self) -> f64 {
        self.breakpoints().iter().map(|&b| self.deriv(b).abs()).fold(0.0, f64::max)
    }

    /// Lipschitz constant of the derivative.
    pub(crate) fn lipschitz(&self) -> f64 {
        let bps = self.breakpoints();
        bps.windows(2).map(|w| self.curvature(0.5 * (w[0] + w[1])).abs()).fold(0.0, f64::max)
    }
}

pub(crate) fn breakpoints_of<'a>(terms: impl Iterator<Item = &'a HuberTerm>) -> Vec<f64> {
    let mut bps: Vec<f64> = terms.flat_map(|t| [t.center - 1.0, t.center + 1.0]).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    bps
}
