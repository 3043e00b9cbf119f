use serde::{Deserialize, Serialize};

use super::{relative_gap, InequalityCheck, EQUALITY_RTOL};
use crate::error::{Error, Result};

/// Non-negative sequence for the sum-of-ratios inequality
/// `sum_j a_j/(epsilon + b_j) <= ln(1 + b_N/epsilon) - N ln(beta2)` with
/// `b_j = sum_{k<=j} beta2^(j-k) a_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceInstance {
    pub a: Vec<f64>,
    pub beta2: f64,
    pub epsilon: f64,
}

/// Signed sequence for the momentum version, where the numerator is the
/// squared `beta1`-decayed sum and the denominator the `beta2`-decayed sum of
/// squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumSequenceInstance {
    pub a: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

fn check_beta2_eps(beta2: f64, epsilon: f64) -> Result<()> {
    if !(beta2 > 0.0 && beta2 <= 1.0) {
        return Err(Error::InvalidArgument(format!("beta2 must lie in (0, 1], got {beta2}")));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// `ln(1 + b/epsilon) - n ln(beta2)`.
fn log_rhs(b: f64, epsilon: f64, n: usize, beta2: f64) -> f64 {
    (b / epsilon).ln_1p() - n as f64 * (-(1.0 - beta2)).ln_1p()
}

pub fn check_sum_ratio(inst: &SequenceInstance) -> Result<InequalityCheck> {
    check_beta2_eps(inst.beta2, inst.epsilon)?;
    if let Some(i) = inst.a.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::InvalidArgument(format!("a[{i}] must be finite and non-negative")));
    }
    let mut b = 0.0;
    let mut lhs = 0.0;
    for &a in &inst.a {
        b = inst.beta2 * b + a;
        lhs += a / (inst.epsilon + b);
    }
    Ok(InequalityCheck::at_most(lhs, log_rhs(b, inst.epsilon, inst.a.len(), inst.beta2)))
}

pub fn check_momentum_sum_ratio(inst: &MomentumSequenceInstance) -> Result<InequalityCheck> {
    check_beta2_eps(inst.beta2, inst.epsilon)?;
    if !(inst.beta1 >= 0.0 && inst.beta1 < inst.beta2) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= beta1 < beta2, got beta1 = {}, beta2 = {}",
            inst.beta1, inst.beta2
        )));
    }
    if let Some(i) = inst.a.iter().position(|a| !a.is_finite()) {
        return Err(Error::NonFinite { what: "a", index: i });
    }
    let (mut b, mut c, mut lhs) = (0.0, 0.0, 0.0);
    for &a in &inst.a {
        c = inst.beta1 * c + a;
        b = inst.beta2 * b + a * a;
        lhs += c * c / (inst.epsilon + b);
    }
    let scale = (1.0 - inst.beta1) * (1.0 - inst.beta1 / inst.beta2);
    Ok(InequalityCheck::at_most(lhs, log_rhs(b, inst.epsilon, inst.a.len(), inst.beta2) / scale))
}

/// Partial sums `sum_{q<Q} a^q sqrt(q+1)` and `sum_{q<Q} a^q sqrt(q)(q+1)`
/// against their closed-form bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricTailReport {
    pub a: f64,
    pub q: u64,
    pub sqrt_sum: f64,
    /// `(1 + sqrt(pi)/(2 sqrt(-ln a)))/(1 - a)`.
    pub sqrt_bound_tight: f64,
    /// `2/(1 - a)^(3/2)`.
    pub sqrt_bound: f64,
    pub pow32_sum: f64,
    /// `4a/(1 - a)^(5/2)`.
    pub pow32_bound: f64,
    pub holds: bool,
}

pub fn geometric_tail_checks(a: f64, q: u64) -> Result<GeometricTailReport> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidArgument(format!("a must lie in (0, 1), got {a}")));
    }
    let (mut sqrt_sum, mut pow32_sum, mut aq) = (0.0, 0.0, 1.0);
    for k in 0..q {
        let kf = k as f64;
        sqrt_sum += aq * (kf + 1.0).sqrt();
        pow32_sum += aq * kf.sqrt() * (kf + 1.0);
        aq *= a;
        if aq == 0.0 {
            break;
        }
    }
    let om = 1.0 - a;
    let sqrt_bound_tight = (1.0 + std::f64::consts::PI.sqrt() / (2.0 * (-a.ln()).sqrt())) / om;
    let sqrt_bound = 2.0 / om.powf(1.5);
    let pow32_bound = 4.0 * a / om.powf(2.5);
    let holds = InequalityCheck::at_most(sqrt_sum, sqrt_bound_tight).holds
        && InequalityCheck::at_most(sqrt_bound_tight, sqrt_bound).holds
        && InequalityCheck::at_most(pow32_sum, pow32_bound).holds;
    Ok(GeometricTailReport { a, q, sqrt_sum, sqrt_bound_tight, sqrt_bound, pow32_sum, pow32_bound, holds })
}

/// `sum_{q=i}^{Q} a^q q` by direct summation against its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeomIndexCheck {
    pub brute: f64,
    pub closed: f64,
    /// `a/(1 - a)^2`, the infinite-sum value for `i = 0`.
    pub bound: f64,
    pub holds: bool,
}

pub fn geom_index_closed_form(a: f64, i: u64, q: u64) -> Result<GeomIndexCheck> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidArgument(format!("a must lie in (0, 1), got {a}")));
    }
    if i > q {
        return Err(Error::InvalidArgument(format!("need i <= Q, got i = {i}, Q = {q}")));
    }
    let brute: f64 = (i..=q).map(|k| a.powi(k as i32) * k as f64).sum();
    let om = 1.0 - a;
    let (i_f, q_f) = (i as f64, q as f64);
    let closed = a.powf(i_f) / om * (i_f - a.powf(q_f - i_f + 1.0) * q_f + (a - a.powf(q_f + 1.0 - i_f)) / om);
    let bound = a / (om * om);
    let mut holds = relative_gap(brute, closed) <= EQUALITY_RTOL;
    if i == 0 {
        holds &= InequalityCheck::at_most(brute, bound).holds;
    }
    Ok(GeomIndexCheck { brute, closed, bound, holds })
}
