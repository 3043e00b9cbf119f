//! Numerical checks of the lemmas behind the convergence bounds.
//!
//! Deterministic inequalities on sequences are checked directly. Lemmas
//! stated in expectation are checked exactly by enumerating every
//! trajectory of a finite-support objective.

mod descent;
mod enumerate;
mod sequences;
mod theorem;

pub use descent::{check_descent_lemma, DescentInstance};
pub use enumerate::{exact_trajectory_expectations, EnumerationReport, IterationCheck, MAX_PATHS};
pub use sequences::{
    check_momentum_sum_ratio, check_sum_ratio, geom_index_closed_form, geometric_tail_checks, GeomIndexCheck,
    GeometricTailReport, MomentumSequenceInstance, SequenceInstance,
};
pub use theorem::{check_theorem_bound, theorem_applies, TheoremCheck, TheoremConstants};

use serde::Serialize;

/// Additive slack granted to every inequality check.
pub const INEQUALITY_SLACK: f64 = 1e-12;

/// Relative tolerance for equality checks.
pub const EQUALITY_RTOL: f64 = 1e-12;

/// Outcome of checking one inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    /// Checks `lhs <= rhs`.
    pub fn at_most(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, holds: lhs <= rhs + INEQUALITY_SLACK }
    }

    /// Checks `lhs >= rhs`.
    pub fn at_least(lhs: f64, rhs: f64) -> Self {
        Self { lhs, rhs, holds: lhs >= rhs - INEQUALITY_SLACK }
    }

    /// `|lhs - rhs|` when the inequality fails, zero otherwise.
    pub fn violation(&self) -> f64 {
        if self.holds {
            0.0
        } else {
            (self.lhs - self.rhs).abs()
        }
    }
}

pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
