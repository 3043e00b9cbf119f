use serde::{Deserialize, Serialize};

use super::InequalityCheck;
use crate::error::{Error, Result};
use crate::objectives::finite::PROB_TOLERANCE;

/// One coordinate of one adaptive step: the law of the sampled gradient
/// `g` (as `(probability, g)` atoms) and the previous second moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentInstance {
    pub support: Vec<(f64, f64)>,
    pub v_prev: f64,
    pub beta2: f64,
    pub epsilon: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

/// Exact check of the adaptive descent inequality
/// `E[G g/sqrt(eps + v)] >= G^2/(2 sqrt(eps + v~)) - 2R E[g^2/(eps + v)]`,
/// with `G = E[g]`, `v = beta2 v_prev + g^2` and `v~ = beta2 v_prev + E[g^2]`.
pub fn check_descent_lemma(inst: &DescentInstance) -> Result<InequalityCheck> {
    validate(inst)?;
    Ok(descent_sides(&inst.support, inst.v_prev, inst.beta2, inst.epsilon, inst.r))
}

fn validate(inst: &DescentInstance) -> Result<()> {
    if inst.support.is_empty() {
        return Err(Error::InvalidArgument("support must contain at least one atom".into()));
    }
    if !(inst.beta2 > 0.0 && inst.beta2 <= 1.0) {
        return Err(Error::InvalidArgument(format!("beta2 must lie in (0, 1], got {}", inst.beta2)));
    }
    if !(inst.epsilon > 0.0 && inst.v_prev >= 0.0) {
        return Err(Error::InvalidArgument("need epsilon > 0 and v_prev >= 0".into()));
    }
    let sum: f64 = inst.support.iter().map(|(p, _)| p).sum();
    if inst.support.iter().any(|(p, _)| p.is_nan() || *p < 0.0) || (sum - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::Unnormalized { sum });
    }
    let cap = inst.r - inst.epsilon.sqrt();
    if let Some(&(_, g)) = inst.support.iter().find(|(_, g)| g.is_nan() || g.abs() > cap) {
        return Err(Error::InvalidArgument(format!("atom gradient {g} exceeds R - sqrt(epsilon) = {cap}")));
    }
    Ok(())
}

/// Both sides of the descent inequality, with no validation.
pub(crate) fn descent_sides(support: &[(f64, f64)], v_prev: f64, beta2: f64, epsilon: f64, r: f64) -> InequalityCheck {
    let mean: f64 = support.iter().map(|(p, g)| p * g).sum();
    let second: f64 = support.iter().map(|(p, g)| p * g * g).sum();
    let v_tilde = beta2 * v_prev + second;
    let (mut lhs, mut ratio) = (0.0, 0.0);
    for &(p, g) in support {
        let v = beta2 * v_prev + g * g;
        lhs += p * mean * g / (epsilon + v).sqrt();
        ratio += p * g * g / (epsilon + v);
    }
    let rhs = mean * mean / (2.0 * (epsilon + v_tilde).sqrt()) - 2.0 * r * ratio;
    InequalityCheck::at_least(lhs, rhs)
}
