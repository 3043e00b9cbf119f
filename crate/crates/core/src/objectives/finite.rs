use rand::Rng;
use serde::{Deserialize, Serialize};

use super::profile::breakpoints_of;
use super::{HuberProfile, HuberTerm, StochasticObjective};
use crate::error::{Error, Result};

/// Probability slack allowed when checking that atoms are normalized.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// One outcome of a finite-support random function.
///
/// `terms[i]` lists the Huber terms acting on coordinate `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub prob: f64,
    pub terms: Vec<Vec<HuberTerm>>,
}

impl Atom {
    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms.iter().zip(x).map(|(ts, &xi)| ts.iter().map(|t| t.value(xi)).sum::<f64>()).sum()
    }

    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        for ((o, ts), &xi) in out.iter_mut().zip(&self.terms).zip(x) {
            *o = ts.iter().map(|t| t.deriv(xi)).sum();
        }
    }

    fn coordinate_grad(&self, i: usize, xi: f64) -> f64 {
        self.terms[i].iter().map(|t| t.deriv(xi)).sum()
    }
}

/// Stochastic objective whose random function takes finitely many values.
///
/// Small instances can be enumerated exhaustively, which turns every
/// expectation along a trajectory into a finite sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFiniteSupport", into = "RawFiniteSupport")]
pub struct FiniteSupportObjective {
    atoms: Vec<Atom>,
    cumulative: Vec<f64>,
    profiles: Vec<HuberProfile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFiniteSupport {
    atoms: Vec<Atom>,
}

impl TryFrom<RawFiniteSupport> for FiniteSupportObjective {
    type Error = Error;

    fn try_from(raw: RawFiniteSupport) -> Result<Self> {
        Self::new(raw.atoms)
    }
}

impl From<FiniteSupportObjective> for RawFiniteSupport {
    fn from(obj: FiniteSupportObjective) -> Self {
        RawFiniteSupport { atoms: obj.atoms }
    }
}

impl FiniteSupportObjective {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let first = atoms.first().ok_or_else(|| Error::InvalidArgument("at least one atom is required".into()))?;
        let d = first.dim();
        if d == 0 {
            return Err(Error::InvalidArgument("atoms must act on at least one coordinate".into()));
        }
        for (k, a) in atoms.iter().enumerate() {
            if a.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: a.dim() });
            }
            if !(a.prob.is_finite() && a.prob > 0.0) {
                return Err(Error::InvalidArgument(format!("atom {k} has non-positive probability {}", a.prob)));
            }
            if a.terms.iter().flatten().any(|t| !(t.weight.is_finite() && t.center.is_finite())) {
                return Err(Error::InvalidArgument(format!("atom {k} has a non-finite term")));
            }
        }
        let sum: f64 = atoms.iter().map(|a| a.prob).sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(Error::Unnormalized { sum });
        }
        let profiles: Vec<HuberProfile> = (0..d)
            .map(|i| {
                HuberProfile::new(
                    atoms
                        .iter()
                        .flat_map(|a| a.terms[i].iter().map(move |t| HuberTerm::new(a.prob * t.weight, t.center)))
                        .collect(),
                )
            })
            .collect();
        if let Some(i) = profiles.iter().position(|p| p.total_weight() < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "coordinate {i} has negative total weight, so F is unbounded below"
            )));
        }
        let cumulative = atoms
            .iter()
            .scan(0.0, |acc, a| {
                *acc += a.prob;
                Some(*acc)
            })
            .collect();
        Ok(Self { atoms, cumulative, profiles })
    }

    /// Deterministic objective `sum_i huber(x_i - c_i)`.
    pub fn single_quadratic(centers: &[f64]) -> Self {
        let terms = centers.iter().map(|&c| vec![HuberTerm::new(1.0, c)]).collect();
        Self::new(vec![Atom { prob: 1.0, terms }]).expect("single atom is normalized")
    }

    /// One coordinate of the toy problem as two atoms: with probability
    /// `1 - p` the term `huber(x - 1)`, with probability `p` the term
    /// `huber(x + 1) / sqrt(p)`.
    pub fn toy_coordinate(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!("p must lie in (0, 1), got {p}")));
        }
        Self::new(vec![
            Atom { prob: 1.0 - p, terms: vec![vec![HuberTerm::new(1.0, 1.0)]] },
            Atom { prob: p, terms: vec![vec![HuberTerm::new(1.0 / p.sqrt(), -1.0)]] },
        ])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// All atoms with their probabilities.
    pub fn enumerate_atoms(&self) -> impl Iterator<Item = (f64, &Atom)> + '_ {
        self.atoms.iter().map(|a| (a.prob, a))
    }

    /// `sup_x ||grad f(x)||_inf` over all atoms.
    pub fn max_abs_sample_grad(&self) -> f64 {
        let d = self.dim();
        self.atoms
            .iter()
            .flat_map(|a| (0..d).map(move |i| HuberProfile::new(a.terms[i].clone()).sup_abs_deriv()))
            .fold(0.0, f64::max)
    }

    /// Smallest `R` with `||grad f(x)||_inf <= R - sqrt(epsilon)` almost surely.
    pub fn adaptive_r(&self, epsilon: f64) -> f64 {
        self.max_abs_sample_grad() + epsilon.sqrt()
    }

    /// `sup_x ||grad F(x)||_2`.
    pub fn sup_true_grad_norm(&self) -> f64 {
        self.profiles.iter().map(|p| p.sup_abs_deriv().powi(2)).sum::<f64>().sqrt()
    }

    /// `sqrt(sup_x E||grad f(x)||^2 - ||grad F(x)||^2)`.
    ///
    /// Per coordinate the variance is a convex quadratic between consecutive
    /// breakpoints (every atom gradient is affine there) and constant on the
    /// tails, so its supremum sits on a breakpoint.
    pub fn sup_variance_sqrt(&self) -> f64 {
        let d = self.dim();
        (0..d)
            .map(|i| {
                breakpoints_of(self.atoms.iter().flat_map(|a| a.terms[i].iter()))
                    .into_iter()
                    .map(|b| self.coordinate_variance(i, b))
                    .fold(0.0, f64::max)
            })
            .sum::<f64>()
            .sqrt()
    }

    fn coordinate_variance(&self, i: usize, xi: f64) -> f64 {
        let (mut mean, mut second) = (0.0, 0.0);
        for a in &self.atoms {
            let g = a.coordinate_grad(i, xi);
            mean += a.prob * g;
            second += a.prob * g * g;
        }
        (second - mean * mean).max(0.0)
    }
}

impl StochasticObjective for FiniteSupportObjective {
    fn dim(&self) -> usize {
        self.profiles.len()
    }

    fn sample_grad<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R, out: &mut [f64]) {
        let u: f64 = rng.gen();
        let k = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.atoms.len() - 1);
        self.atoms[k].grad(x, out);
    }

    fn true_grad(&self, x: &[f64], out: &mut [f64]) {
        for ((o, p), &xi) in out.iter_mut().zip(&self.profiles).zip(x) {
            *o = p.deriv(xi);
        }
    }

    fn true_value(&self, x: &[f64]) -> f64 {
        self.profiles.iter().zip(x).map(|(p, &xi)| p.value(xi)).sum()
    }

    fn f_star(&self) -> f64 {
        self.profiles.iter().map(HuberProfile::inf).sum()
    }

    fn grad_bound(&self) -> Option<f64> {
        Some(self.max_abs_sample_grad())
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.profiles.iter().map(HuberProfile::lipschitz).fold(0.0, f64::max))
    }
}
