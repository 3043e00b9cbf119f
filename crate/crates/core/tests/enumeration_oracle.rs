//! Cross-checks the depth-first enumerator against a brute-force one that
//! replays every path from scratch and recomputes every conditional
//! expectation by enumerating suffixes.

use adaconv_core::lemma_lab::{exact_trajectory_expectations, EnumerationReport};
use adaconv_core::objectives::{Atom, FiniteSupportObjective, HuberTerm, StochasticObjective};
use adaconv_core::{Algorithm, HyperParams};

struct Brute<'a> {
    obj: &'a FiniteSupportObjective,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    sgd: bool,
}

#[derive(Clone)]
struct Snap {
    x: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Brute<'_> {
    fn alpha_n(&self, n: usize) -> f64 {
        if self.sgd {
            return self.alpha;
        }
        let base = self.alpha * (1.0 - self.beta1);
        if self.beta2 == 1.0 {
            base
        } else {
            base * ((1.0 - self.beta2.powi(n as i32)) / (1.0 - self.beta2)).sqrt()
        }
    }

    fn atom_grad(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let atom = &self.obj.atoms()[k];
        atom.terms
            .iter()
            .zip(x)
            .map(|(ts, &xi)| ts.iter().map(|t| t.weight * huber_deriv(xi - t.center)).sum())
            .collect()
    }

    fn true_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; x.len()];
        for (k, a) in self.obj.atoms().iter().enumerate() {
            for (s, g) in acc.iter_mut().zip(self.atom_grad(k, x)) {
                *s += a.prob * g;
            }
        }
        acc
    }

    /// Applies step `n` (1-based) with atom `k`; returns the sampled gradient.
    fn step(&self, s: &mut Snap, n: usize, k: usize) -> Vec<f64> {
        let g = self.atom_grad(k, &s.x);
        let a = self.alpha_n(n);
        for i in 0..g.len() {
            s.m[i] = self.beta1 * s.m[i] + g[i];
            if self.sgd {
                s.x[i] -= a * s.m[i];
            } else {
                s.v[i] = self.beta2 * s.v[i] + g[i] * g[i];
                s.x[i] -= a * s.m[i] / (self.eps + s.v[i]).sqrt();
            }
        }
        g
    }

    fn digits(idx: usize, k: usize, len: usize) -> Vec<usize> {
        let mut out = vec![0; len];
        let mut r = idx;
        for slot in out.iter_mut() {
            *slot = r % k;
            r /= k;
        }
        out
    }

    fn prob(&self, seq: &[usize]) -> f64 {
        seq.iter().map(|&k| self.obj.atoms()[k].prob).product()
    }

    /// `E[sum_{j=t+1}^{n} beta2^(n-j) g_{j,i}^2]` given the state after `t` steps.
    fn future_second_moment(&self, after_t: &Snap, t: usize, n: usize) -> Vec<f64> {
        let k = self.obj.atom_count();
        let len = n - t;
        let mut out = vec![0.0; after_t.x.len()];
        for idx in 0..k.pow(len as u32) {
            let seq = Self::digits(idx, k, len);
            let p = self.prob(&seq);
            let mut s = after_t.clone();
            for (off, &a) in seq.iter().enumerate() {
                let j = t + 1 + off;
                let g = self.step(&mut s, j, a);
                for i in 0..g.len() {
                    out[i] += p * self.beta2.powi((n - j) as i32) * g[i] * g[i];
                }
            }
        }
        out
    }

    fn report(&self, x0: &[f64], n_steps: usize) -> Oracle {
        let k = self.obj.atom_count();
        let d = x0.len();
        let r_ad = self.obj.adaptive_r(self.eps);
        let mut o = Oracle {
            paths: 0,
            total_prob: 0.0,
            final_value: 0.0,
            grad_sq: vec![0.0; n_steps],
            m_sq: vec![0.0; n_steps],
            u_sq: vec![0.0; n_steps],
            big_u_sq: vec![0.0; n_steps],
            descent_lhs: vec![0.0; n_steps],
            descent_rhs: vec![0.0; n_steps],
            mom_lhs: vec![0.0; n_steps],
            recentred: vec![0.0; n_steps],
        };
        for idx in 0..k.pow(n_steps as u32) {
            let seq = Self::digits(idx, k, n_steps);
            let p = self.prob(&seq);
            o.paths += 1;
            o.total_prob += p;
            let mut s = Snap { x: x0.to_vec(), m: vec![0.0; d], v: vec![0.0; d] };
            let mut history = vec![s.clone()];
            for (t, &a) in seq.iter().enumerate() {
                let n = t + 1;
                let big_g = self.true_grad(&s.x);
                o.grad_sq[t] += p * big_g.iter().map(|g| g * g).sum::<f64>();
                if !self.sgd {
                    for i in 0..d {
                        let gs: Vec<(f64, f64)> =
                            (0..k).map(|kk| (self.obj.atoms()[kk].prob, self.atom_grad(kk, &s.x)[i])).collect();
                        let mean: f64 = gs.iter().map(|(q, g)| q * g).sum();
                        let second: f64 = gs.iter().map(|(q, g)| q * g * g).sum();
                        let vt = self.beta2 * s.v[i] + second;
                        let mut lhs = 0.0;
                        let mut ratio = 0.0;
                        for &(q, g) in &gs {
                            let v = self.beta2 * s.v[i] + g * g;
                            lhs += q * mean * g / (self.eps + v).sqrt();
                            ratio += q * g * g / (self.eps + v);
                        }
                        o.descent_lhs[t] += p * lhs;
                        o.descent_rhs[t] += p * (mean * mean / (2.0 * (self.eps + vt).sqrt()) - 2.0 * r_ad * ratio);
                    }
                }
                let g = self.step(&mut s, n, a);
                o.m_sq[t] += p * s.m.iter().map(|m| m * m).sum::<f64>();
                if self.sgd {
                    o.mom_lhs[t] += p * big_g.iter().zip(&s.m).map(|(a, b)| a * b).sum::<f64>();
                } else {
                    for i in 0..d {
                        let den = (self.eps + s.v[i]).sqrt();
                        o.u_sq[t] += p * (s.m[i] / den).powi(2);
                        o.big_u_sq[t] += p * (g[i] / den).powi(2);
                        o.mom_lhs[t] += p * big_g[i] * s.m[i] / den;
                    }
                }
                history.push(s.clone());
            }
            o.final_value += p * self.obj.true_value(&s.x);
            if !self.sgd {
                for n in 1..=n_steps {
                    for kk in 0..n {
                        let t = n - kk - 1;
                        let prefix = &history[t];
                        let big_g = self.true_grad(&prefix.x);
                        let future = self.future_second_moment(prefix, t, n);
                        let mut term = 0.0;
                        for i in 0..d {
                            let vt = self.beta2.powi(kk as i32 + 1) * prefix.v[i] + future[i];
                            term += big_g[i] * big_g[i] / (self.eps + vt).sqrt();
                        }
                        o.recentred[n - 1] += p * self.beta1.powi(kk as i32) * term;
                    }
                }
            }
        }
        o
    }
}

fn huber_deriv(y: f64) -> f64 {
    y.clamp(-1.0, 1.0)
}

struct Oracle {
    paths: u64,
    total_prob: f64,
    final_value: f64,
    grad_sq: Vec<f64>,
    m_sq: Vec<f64>,
    u_sq: Vec<f64>,
    big_u_sq: Vec<f64>,
    descent_lhs: Vec<f64>,
    descent_rhs: Vec<f64>,
    mom_lhs: Vec<f64>,
    recentred: Vec<f64>,
}

fn assert_close(what: &str, got: f64, want: f64) {
    let scale = got.abs().max(want.abs());
    assert!((got - want).abs() <= 1e-12 * scale.max(1e-300), "{what}: enumerator {got:e} vs brute force {want:e}");
}

fn tau_mean(values: &[f64], beta1: f64) -> f64 {
    let n = values.len();
    let w: Vec<f64> = (0..n).map(|j| 1.0 - beta1.powi((n - j) as i32)).collect();
    let total: f64 = w.iter().sum();
    w.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / total
}

fn compare(b: &Brute, x0: &[f64], n_steps: usize, rep: &EnumerationReport) {
    let o = b.report(x0, n_steps);
    assert_eq!(rep.path_count, o.paths);
    assert_close("total probability", rep.total_probability, o.total_prob);
    assert_close("final value", rep.expected_final_value, o.final_value);
    assert_close("tau gradient norm", rep.grad_norm_sq_tau, tau_mean(&o.grad_sq, b.beta1));
    for t in 0..n_steps {
        assert_close("gradient norm", rep.grad_norm_sq[t], o.grad_sq[t]);
        assert_close("momentum norm", rep.m_norm_sq[t], o.m_sq[t]);
        assert_close("momentum descent lhs", rep.momentum_descent[t].lhs, o.mom_lhs[t]);
    }
    let smooth = b.obj.smoothness().unwrap();
    if b.sgd {
        let r = b.obj.sup_true_grad_norm();
        let sigma = b.obj.sup_variance_sqrt();
        for n in 1..=n_steps {
            let rec: f64 = (0..n).map(|k| b.beta1.powi(k as i32) * o.grad_sq[n - k - 1]).sum();
            let rhs = rec - b.alpha * smooth * b.beta1 * (r * r + sigma * sigma) / (1.0 - b.beta1).powi(3);
            assert_close("sgd descent rhs", rep.momentum_descent[n - 1].rhs, rhs);
        }
        return;
    }
    let r = b.obj.adaptive_r(b.eps);
    for n in 1..=n_steps {
        assert_close("descent lhs", rep.descent[n - 1].lhs, o.descent_lhs[n - 1]);
        assert_close("descent rhs", rep.descent[n - 1].rhs, o.descent_rhs[n - 1]);
        let a = b.alpha_n(n);
        let mut drift = 0.0;
        for l in 1..n {
            let inner: f64 = (l..n).map(|k| b.beta1.powi(k as i32) * (k as f64).sqrt()).sum();
            drift += o.u_sq[n - l - 1] * inner;
        }
        let mut noise = 0.0;
        for k in 0..n {
            noise += (b.beta1 / b.beta2).powi(k as i32) * ((k + 1) as f64).sqrt() * o.big_u_sq[n - k - 1];
        }
        let rhs = 0.5 * o.recentred[n - 1]
            - a * a * smooth * smooth / (4.0 * r) * (1.0 - b.beta1).sqrt() * drift
            - 3.0 * r / (1.0 - b.beta1).sqrt() * noise;
        assert_close("momentum descent rhs", rep.momentum_descent[n - 1].rhs, rhs);
    }
}

fn brute<'a>(obj: &'a FiniteSupportObjective, h: &HyperParams, sgd: bool) -> Brute<'a> {
    Brute { obj, alpha: h.alpha(), beta1: h.beta1(), beta2: h.beta2(), eps: h.epsilon(), sgd }
}

#[test]
fn two_atoms_eight_steps_adaptive() {
    let obj = FiniteSupportObjective::toy_coordinate(0.3).unwrap();
    let h = HyperParams::new(0.1, 0.9, 0.999, 1e-8).unwrap();
    let rep = exact_trajectory_expectations(&obj, &[0.5], &h, Algorithm::Adaptive, 8).unwrap();
    compare(&brute(&obj, &h, false), &[0.5], 8, &rep);
}

#[test]
fn two_atoms_eight_steps_adagrad_with_momentum() {
    let obj = FiniteSupportObjective::toy_coordinate(0.1).unwrap();
    let h = HyperParams::new(0.3, 0.5, 1.0, 1e-4).unwrap();
    let rep = exact_trajectory_expectations(&obj, &[2.5], &h, Algorithm::Adaptive, 8).unwrap();
    compare(&brute(&obj, &h, false), &[2.5], 8, &rep);
}

#[test]
fn three_atoms_two_coordinates_adaptive() {
    let obj = FiniteSupportObjective::new(vec![
        Atom { prob: 0.5, terms: vec![vec![HuberTerm::new(1.0, 1.0)], vec![HuberTerm::new(0.5, -2.0)]] },
        Atom {
            prob: 0.3,
            terms: vec![vec![HuberTerm::new(2.0, -1.0), HuberTerm::new(0.5, 0.5)], vec![HuberTerm::new(1.5, 0.0)]],
        },
        Atom { prob: 0.2, terms: vec![vec![HuberTerm::new(0.1, 3.0)], vec![HuberTerm::new(3.0, 1.0)]] },
    ])
    .unwrap();
    let h = HyperParams::new(0.2, 0.7, 0.95, 1e-3).unwrap();
    let rep = exact_trajectory_expectations(&obj, &[0.0, 1.0], &h, Algorithm::Adaptive, 5).unwrap();
    compare(&brute(&obj, &h, false), &[0.0, 1.0], 5, &rep);
}

#[test]
fn two_atoms_sgd_momentum() {
    let obj = FiniteSupportObjective::toy_coordinate(0.2).unwrap();
    let h = HyperParams::new(0.05, 0.8, 1.0, 1e-8).unwrap();
    let rep = exact_trajectory_expectations(&obj, &[3.0], &h, Algorithm::SgdHb, 9).unwrap();
    compare(&brute(&obj, &h, true), &[3.0], 9, &rep);
}
