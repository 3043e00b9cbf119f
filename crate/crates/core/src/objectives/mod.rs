//! Stochastic objectives built from Huber terms.
//!
//! Every objective here is separable: coordinate `i` of a sampled gradient
//! only depends on `x_i`. That makes the problem constants (lower bound,
//! gradient bounds, smoothness, variance bound) computable exactly from the
//! breakpoints of the piecewise-quadratic coordinate profiles.

pub(crate) mod finite;
mod profile;
mod toy;

pub use finite::{Atom, FiniteSupportObjective};
pub use profile::HuberTerm;
pub use toy::ToyProblem;

pub(crate) use profile::HuberProfile;

use rand::Rng;

/// Huber function and its derivative: `y^2/2` for `|y| <= 1`, `|y| - 1/2` beyond.
pub fn huber(y: f64) -> (f64, f64) {
    if y.abs() <= 1.0 {
        (0.5 * y * y, y)
    } else {
        (y.abs() - 0.5, y.signum())
    }
}

/// Contract for a stochastic objective `F(x) = E[f(x)]`.
pub trait StochasticObjective: Sync {
    fn dim(&self) -> usize;

    /// Writes one draw of `grad f(x)` into `out`.
    fn sample_grad<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R, out: &mut [f64]);

    /// Writes the exact `grad F(x)` into `out`.
    fn true_grad(&self, x: &[f64], out: &mut [f64]);

    fn true_value(&self, x: &[f64]) -> f64;

    /// Lower bound `F*` (the infimum for the objectives in this crate).
    fn f_star(&self) -> f64;

    /// Almost-sure bound on `||grad f(x)||_inf`, when one is known.
    ///
    /// This is the bound *before* the `sqrt(epsilon)` shift used by the
    /// adaptive convergence bounds.
    fn grad_bound(&self) -> Option<f64>;

    /// Lipschitz constant of `grad F` in the l2 norm, when known.
    fn smoothness(&self) -> Option<f64>;
}
