use serde::Serialize;

use super::enumerate::exact_trajectory_expectations;
use super::INEQUALITY_SLACK;
use crate::bounds::{BoundInputs, BoundValue, Theorem};
use crate::error::{Error, Result};
use crate::objectives::{FiniteSupportObjective, StochasticObjective};
use crate::optim::{Algorithm, HyperParams};

/// Problem constants of a finite-support objective as used by the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremConstants {
    pub d: usize,
    pub r: f64,
    pub l: f64,
    pub f0_minus_fstar: f64,
    pub sigma: f64,
}

impl TheoremConstants {
    /// Exact constants at starting point `x0`. For the adaptive bounds `r` is
    /// the sampled-gradient bound plus `sqrt(epsilon)`; for SGD it bounds
    /// `||grad F||_2` and `sigma^2` bounds the gradient noise variance.
    pub fn of(obj: &FiniteSupportObjective, x0: &[f64], theorem: Theorem, epsilon: f64) -> Self {
        let (r, sigma) = match theorem {
            Theorem::Sgd => (obj.sup_true_grad_norm(), obj.sup_variance_sqrt()),
            _ => (obj.adaptive_r(epsilon), 0.0),
        };
        Self {
            d: obj.dim(),
            r,
            l: obj.smoothness().unwrap_or(0.0),
            f0_minus_fstar: (obj.true_value(x0) - obj.f_star()).max(0.0),
            sigma,
        }
    }

    pub fn bound_inputs(&self, h: &HyperParams, n: usize) -> BoundInputs {
        BoundInputs {
            d: self.d,
            r: self.r,
            l: self.l,
            f0_minus_fstar: self.f0_minus_fstar,
            epsilon: h.epsilon(),
            n: n as u64,
            alpha: h.alpha(),
            beta1: h.beta1(),
            beta2: h.beta2(),
            sigma: self.sigma,
        }
    }
}

/// Whether `theorem` covers the hyperparameters `h`.
pub fn theorem_applies(theorem: Theorem, h: &HyperParams) -> bool {
    match theorem {
        Theorem::Thm1 => h.beta1() == 0.0 && h.is_adagrad(),
        Theorem::Thm2 => h.beta1() == 0.0 && !h.is_adagrad(),
        Theorem::Thm3 => h.is_adagrad(),
        Theorem::Thm4 => !h.is_adagrad(),
        Theorem::Sgd => true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremCheck {
    pub theorem: Theorem,
    /// Exact `E ||grad F(x_tau)||^2`.
    pub exact_lhs: f64,
    pub bound: BoundValue,
    pub constants: TheoremConstants,
    /// `exact_lhs <= bound.total`; vacuously true when the horizon is invalid.
    pub holds: bool,
}

/// Compares the exact expected squared gradient norm at the random iterate
/// with the matching bound.
pub fn check_theorem_bound(
    obj: &FiniteSupportObjective,
    x0: &[f64],
    h: &HyperParams,
    theorem: Theorem,
    n_steps: usize,
) -> Result<TheoremCheck> {
    if !theorem_applies(theorem, h) {
        return Err(Error::InvalidArgument(format!(
            "{} does not cover beta1 = {}, beta2 = {}",
            theorem.name(),
            h.beta1(),
            h.beta2()
        )));
    }
    let constants = TheoremConstants::of(obj, x0, theorem, h.epsilon());
    let bound = theorem.evaluate(&constants.bound_inputs(h, n_steps))?;
    let algorithm = if theorem == Theorem::Sgd { Algorithm::SgdHb } else { Algorithm::Adaptive };
    let report = exact_trajectory_expectations(obj, x0, h, algorithm, n_steps)?;
    let exact_lhs = report.grad_norm_sq_tau;
    let holds = !bound.valid || exact_lhs <= bound.total + INEQUALITY_SLACK;
    Ok(TheoremCheck { theorem, exact_lhs, bound, constants, holds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_dominate_on_small_grid() {
        let obj = FiniteSupportObjective::toy_coordinate(0.3).unwrap();
        let x0 = [3.0];
        for theorem in Theorem::ALL {
            for (alpha, beta1, beta2) in [(0.1, 0.0, 1.0), (1.0, 0.0, 0.95), (0.1, 0.5, 1.0), (0.01, 0.5, 0.999)] {
                let h = HyperParams::new(alpha, beta1, beta2, 1e-8).unwrap();
                if !theorem_applies(theorem, &h) {
                    assert!(check_theorem_bound(&obj, &x0, &h, theorem, 6).is_err());
                    continue;
                }
                let c = check_theorem_bound(&obj, &x0, &h, theorem, 6).unwrap();
                assert!(c.bound.valid && c.holds, "{c:?}");
            }
        }
    }

    #[test]
    fn invalid_horizon_makes_no_claim() {
        let obj = FiniteSupportObjective::toy_coordinate(0.3).unwrap();
        let h = HyperParams::new(0.1, 0.9, 1.0, 1e-8).unwrap();
        let c = check_theorem_bound(&obj, &[3.0], &h, Theorem::Thm3, 8).unwrap();
        assert!(!c.bound.valid && c.holds);
    }

    #[test]
    fn constants_of_toy_coordinate() {
        let obj = FiniteSupportObjective::toy_coordinate(0.25).unwrap();
        let c = TheoremConstants::of(&obj, &[3.0], Theorem::Thm1, 1e-8);
        assert!((c.r - (2.0 + 1e-4)).abs() < 1e-15);
        // F(3) = 0.75 * 1.5 + 0.25 * 2 * 3.5, and F* is attained at 1 - sqrt(p)/(1 - p)
        let xs = 1.0 - 0.5 / 0.75;
        let f_star = 0.75 * 0.5 * (xs - 1.0f64).powi(2) + 0.5 * (xs + 1.0 - 0.5);
        assert!((c.f0_minus_fstar - (1.125 + 1.75 - f_star)).abs() < 1e-12);
    }
}
