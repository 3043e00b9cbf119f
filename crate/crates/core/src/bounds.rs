//! Right-hand sides of the convergence bounds on `E ||grad F(x_tau)||^2`.
//!
//! Every bound is split into the initial-condition term (proportional to
//! `F(x0) - F*`) and the remaining log or variance term. Bounds whose
//! horizon condition fails come back with `valid = false` and infinite
//! terms so sweeps can tabulate them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::effective_n;

/// Problem constants and hyperparameters fed to a bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    pub d: usize,
    /// Almost-sure bound on `||grad f||_inf + sqrt(epsilon)` for the adaptive
    /// bounds, bound on `||grad F||_2` for the SGD bounds.
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub f0_minus_fstar: f64,
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub n: u64,
    pub alpha: f64,
    #[serde(default)]
    pub beta1: f64,
    #[serde(default = "one")]
    pub beta2: f64,
    #[serde(default)]
    pub sigma: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundValue {
    pub term_init: f64,
    pub term_log: f64,
    pub total: f64,
    pub valid: bool,
    /// Prefactor `C` of the log term, for bounds that define one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

impl BoundValue {
    fn new(term_init: f64, term_log: f64, c: Option<f64>) -> Self {
        Self { term_init, term_log, total: term_init + term_log, valid: true, c }
    }

    fn invalid() -> Self {
        Self { term_init: f64::INFINITY, term_log: f64::INFINITY, total: f64::INFINITY, valid: false, c: None }
    }
}

/// Which bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    /// Adagrad without momentum.
    Thm1,
    /// Adam without momentum.
    Thm2,
    /// Adagrad with momentum.
    Thm3,
    /// Adam with momentum.
    Thm4,
    /// SGD with heavy-ball momentum.
    Sgd,
}

impl Theorem {
    pub const ALL: [Theorem; 5] = [Theorem::Thm1, Theorem::Thm2, Theorem::Thm3, Theorem::Thm4, Theorem::Sgd];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::Thm1 => "thm1",
            Theorem::Thm2 => "thm2",
            Theorem::Thm3 => "thm3",
            Theorem::Thm4 => "thm4",
            Theorem::Sgd => "sgd",
        }
    }

    pub fn evaluate(self, inputs: &BoundInputs) -> Result<BoundValue> {
        match self {
            Theorem::Thm1 => adagrad_bound(inputs),
            Theorem::Thm2 => adam_bound(inputs),
            Theorem::Thm3 => adagrad_momentum_bound(inputs),
            Theorem::Thm4 => adam_momentum_bound(inputs),
            Theorem::Sgd => sgd_momentum_bound(inputs),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_common(inp: &BoundInputs) -> Result<()> {
    if inp.d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    if inp.n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    positive("R", inp.r)?;
    positive("L", inp.l)?;
    positive("alpha", inp.alpha)?;
    if !(inp.f0_minus_fstar.is_finite() && inp.f0_minus_fstar >= 0.0) {
        return Err(Error::InvalidArgument(format!("f0_minus_fstar must be non-negative, got {}", inp.f0_minus_fstar)));
    }
    if !(0.0..1.0).contains(&inp.beta1) {
        return Err(Error::InvalidArgument(format!("beta1 must lie in [0, 1), got {}", inp.beta1)));
    }
    Ok(())
}

fn check_adaptive(inp: &BoundInputs) -> Result<()> {
    check_common(inp)?;
    positive("epsilon", inp.epsilon)?;
    if inp.r < inp.epsilon.sqrt() {
        return Err(Error::GradientBoundTooSmall { r: inp.r, sqrt_eps: inp.epsilon.sqrt() });
    }
    Ok(())
}

fn check_beta2_below_one(inp: &BoundInputs) -> Result<()> {
    if inp.beta2 == 1.0 {
        return Err(Error::UseAdagradBound);
    }
    if !(inp.beta2 > 0.0 && inp.beta2 < 1.0) {
        return Err(Error::InvalidArgument(format!("beta2 must lie in (0, 1), got {}", inp.beta2)));
    }
    Ok(())
}

/// `-ln(beta2)`, accurate for `beta2` close to 1.
fn neg_ln(beta2: f64) -> f64 {
    -(-(1.0 - beta2)).ln_1p()
}

/// `ln(1 + N R^2 / epsilon)`, the log factor of the Adagrad bounds.
fn adagrad_log(inp: &BoundInputs) -> f64 {
    (inp.n as f64 * inp.r * inp.r / inp.epsilon).ln_1p()
}

/// `ln(1 + R^2 / ((1 - beta2) epsilon))`, the log factor of the Adam bounds.
fn adam_log(inp: &BoundInputs) -> f64 {
    (inp.r * inp.r / ((1.0 - inp.beta2) * inp.epsilon)).ln_1p()
}

/// Adagrad without momentum (`beta1 = 0`, `beta2 = 1`; both fields ignored):
/// `2R(F0 - F*)/(alpha sqrt(N)) + (4dR^2 + alpha d R L) ln(1 + N R^2/epsilon)/sqrt(N)`.
pub fn adagrad_bound(inp: &BoundInputs) -> Result<BoundValue> {
    check_adaptive(inp)?;
    Ok(adagrad_shape(inp, 4.0, adagrad_log(inp)))
}

/// The Adagrad bound with a chosen leading constant (4 without momentum) and
/// an arbitrary value in place of the log factor.
fn adagrad_shape(inp: &BoundInputs, lead: f64, log_factor: f64) -> BoundValue {
    let BoundInputs { r, l, alpha, .. } = *inp;
    let d = inp.d as f64;
    let sqrt_n = (inp.n as f64).sqrt();
    let c = lead * d * r * r + alpha * d * r * l;
    BoundValue::new(2.0 * r * inp.f0_minus_fstar / (alpha * sqrt_n), c * log_factor / sqrt_n, Some(c))
}

/// Adagrad bound evaluated with `log_factor` in place of `ln(1 + N R^2/epsilon)`.
///
/// Used to compare Adam under the finite-horizon rule with Adagrad.
pub fn adagrad_bound_with_log(inp: &BoundInputs, log_factor: f64) -> Result<BoundValue> {
    check_adaptive(inp)?;
    Ok(adagrad_shape(inp, 4.0, log_factor))
}

/// Adam without momentum (`beta1 = 0`, `beta2 < 1`):
/// `2R(F0 - F*)/(alpha N) + C (ln(1 + R^2/((1-beta2) epsilon))/N - ln beta2)`
/// with `C = 4dR^2/sqrt(1-beta2) + alpha d R L/(1-beta2)`.
pub fn adam_bound(inp: &BoundInputs) -> Result<BoundValue> {
    check_adaptive(inp)?;
    check_beta2_below_one(inp)?;
    Ok(adam_shape(inp, 4.0))
}

fn adam_shape(inp: &BoundInputs, lead: f64) -> BoundValue {
    let BoundInputs { r, l, alpha, beta2, .. } = *inp;
    let d = inp.d as f64;
    let n = inp.n as f64;
    let one_minus = 1.0 - beta2;
    let c = lead * d * r * r / one_minus.sqrt() + alpha * d * r * l / one_minus;
    BoundValue::new(2.0 * r * inp.f0_minus_fstar / (alpha * n), c * (adam_log(inp) / n + neg_ln(beta2)), Some(c))
}

/// Adagrad with momentum (`beta2 = 1`, field ignored):
/// `2R sqrt(N)(F0 - F*)/(alpha Ñ) + (sqrt(N)/Ñ) C ln(1 + N R^2/epsilon)` with
/// `C = alpha d R L + 12dR^2/(1-beta1) + 2 alpha^2 d L^2 beta1/(1-beta1)`.
pub fn adagrad_momentum_bound(inp: &BoundInputs) -> Result<BoundValue> {
    check_adaptive(inp)?;
    let eff = effective_n(inp.n as usize, inp.beta1);
    if !eff.valid {
        return Ok(BoundValue::invalid());
    }
    let BoundInputs { r, l, alpha, beta1, .. } = *inp;
    let d = inp.d as f64;
    let sqrt_n = (inp.n as f64).sqrt();
    let nt = eff.value;
    let c =
        alpha * d * r * l + 12.0 * d * r * r / (1.0 - beta1) + 2.0 * alpha * alpha * d * l * l * beta1 / (1.0 - beta1);
    Ok(BoundValue::new(
        2.0 * r * sqrt_n * inp.f0_minus_fstar / (alpha * nt),
        sqrt_n / nt * c * adagrad_log(inp),
        Some(c),
    ))
}

/// Adam with momentum (`0 <= beta1 < beta2 < 1`):
/// `2R(F0 - F*)/(alpha Ñ) + C (ln(1 + R^2/((1-beta2) epsilon))/Ñ - (N/Ñ) ln beta2)`.
pub fn adam_momentum_bound(inp: &BoundInputs) -> Result<BoundValue> {
    check_adaptive(inp)?;
    check_beta2_below_one(inp)?;
    let BoundInputs { r, l, alpha, beta1, beta2, .. } = *inp;
    if beta1 >= beta2 {
        return Err(Error::InvalidArgument(format!(
            "beta1 must be strictly below beta2, got beta1 = {beta1}, beta2 = {beta2}"
        )));
    }
    let eff = effective_n(inp.n as usize, beta1);
    if !eff.valid {
        return Ok(BoundValue::invalid());
    }
    let d = inp.d as f64;
    let n = inp.n as f64;
    let nt = eff.value;
    let gap = 1.0 - beta1 / beta2;
    let om2 = 1.0 - beta2;
    let c = alpha * d * r * l * (1.0 - beta1) / (gap * om2)
        + 12.0 * d * r * r * (1.0 - beta1).sqrt() / (gap.powf(1.5) * om2.sqrt())
        + 2.0 * alpha * alpha * d * l * l * beta1 / (gap * om2.powf(1.5));
    Ok(BoundValue::new(
        2.0 * r * inp.f0_minus_fstar / (alpha * nt),
        c * (adam_log(inp) / nt + n / nt * neg_ln(beta2)),
        Some(c),
    ))
}

/// SGD with heavy-ball momentum, valid for `N > 1/(1-beta1)`:
/// `(1-beta1)(F0 - F*)/(alpha Ñ) + (N/Ñ) alpha L (1+beta1)(R^2 + sigma^2)/(2(1-beta1)^2)`.
///
/// Here `R` bounds `||grad F||_2` and `sigma^2` bounds the gradient noise variance.
pub fn sgd_momentum_bound(inp: &BoundInputs) -> Result<BoundValue> {
    check_common(inp)?;
    check_sigma(inp)?;
    let BoundInputs { r, l, alpha, beta1, sigma, .. } = *inp;
    let n = inp.n as f64;
    if n <= 1.0 / (1.0 - beta1) {
        return Ok(BoundValue::invalid());
    }
    let nt = effective_n(inp.n as usize, beta1).value;
    Ok(BoundValue::new(
        (1.0 - beta1) * inp.f0_minus_fstar / (alpha * nt),
        n / nt * alpha * l * (1.0 + beta1) * (r * r + sigma * sigma) / (2.0 * (1.0 - beta1).powi(2)),
        None,
    ))
}

fn check_sigma(inp: &BoundInputs) -> Result<()> {
    if !(inp.sigma.is_finite() && inp.sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be non-negative, got {}", inp.sigma)));
    }
    Ok(())
}

/// Earlier bound for SGD with heavy-ball momentum, with step size
/// `alpha = (1-beta1) min(1/L, C/sqrt(N))` (the `alpha` field is ignored):
/// `(2/N)(F0 - F*) max(2L, sqrt(N)/C) + (C/sqrt(N)) L/(1-beta1)^2 (beta1^2 (R^2+sigma^2) + (1-beta1)^2 sigma^2)`.
pub fn yang_sgd_bound(inp: &BoundInputs, c_const: f64) -> Result<BoundValue> {
    let probe = BoundInputs { alpha: 1.0, ..*inp };
    check_common(&probe)?;
    check_sigma(inp)?;
    positive("C", c_const)?;
    let BoundInputs { r, l, beta1, sigma, .. } = *inp;
    let n = inp.n as f64;
    let s2 = sigma * sigma;
    Ok(BoundValue::new(
        2.0 / n * inp.f0_minus_fstar * (2.0 * l).max(n.sqrt() / c_const),
        c_const / n.sqrt() * l / (1.0 - beta1).powi(2) * (beta1 * beta1 * (r * r + s2) + (1.0 - beta1).powi(2) * s2),
        Some(c_const),
    ))
}

/// Step size `alpha1/sqrt(N)` and `beta2 = 1 - 1/N` for a known horizon `N`.
pub fn finite_horizon_params(n: u64, alpha1: f64) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("finite-horizon rule needs N >= 2, got {n}")));
    }
    positive("alpha1", alpha1)?;
    let n = n as f64;
    Ok((alpha1 / n.sqrt(), 1.0 - 1.0 / n))
}

/// `-N ln(1 - 1/N)`, the exact amount the Adam bound under the finite-horizon
/// rule adds next to the Adagrad log factor. It tends to 1 from above.
pub fn finite_horizon_log_shift(n: u64) -> f64 {
    let n = n as f64;
    -n * (-1.0 / n).ln_1p()
}
