//! Differential-privacy primitives: truncated Laplace noise, the exponential
//! mechanism over a finite candidate list, and advanced composition.
//!
//! All logarithms are natural logarithms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::PrivacyBudget;

/// Parameters of the truncated Laplace distribution: density proportional to
/// `exp(−|x|·ε/Δ)` on `[−A, A]` with `A = (Δ/ε)·ln(1 + (e^ε − 1)/(2δ))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncLapSpec {
    sensitivity: f64,
    epsilon: f64,
    delta: f64,
    bound: f64,
}

impl TruncLapSpec {
    pub fn new(sensitivity: f64, epsilon: f64, delta: f64) -> Result<Self> {
        if !(sensitivity > 0.0 && sensitivity.is_finite()) {
            return Err(invalid("sensitivity must be positive"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid("epsilon must be positive"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid("delta must lie in (0, 1)"));
        }
        let bound = truncation_bound(sensitivity, epsilon, delta);
        Ok(TruncLapSpec { sensitivity, epsilon, delta, bound })
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Support half-width `A`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    fn scale(&self) -> f64 {
        self.sensitivity / self.epsilon
    }

    /// Density of the noise at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        density_on_support(self.scale(), self.bound, x)
    }

    /// Closed-form CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        cdf_on_support(self.scale(), self.bound, x)
    }

    /// Inverse of [`cdf`](Self::cdf) for `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let (b, a) = (self.scale(), self.bound);
        // mass normaliser: 1 − e^{−A/b}
        let z = -(-a / b).exp_m1();
        let x = if u < 0.5 {
            b * ((-a / b).exp() + 2.0 * z * u).ln()
        } else {
            -b * (-(2.0 * u - 1.0) * z).ln_1p()
        };
        x.clamp(-a, a)
    }

    /// One draw by inverse-CDF sampling. Always lies in `[−A, A]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// `A = (Δ/ε)·ln(1 + (e^ε − 1)/(2δ))`.
pub fn truncation_bound(sensitivity: f64, epsilon: f64, delta: f64) -> f64 {
    sensitivity / epsilon * (epsilon.exp_m1() / (2.0 * delta)).ln_1p()
}

fn density_on_support(scale: f64, bound: f64, x: f64) -> f64 {
    if x.abs() > bound {
        return 0.0;
    }
    let z = -(-bound / scale).exp_m1();
    (-x.abs() / scale).exp() / (2.0 * scale * z)
}

fn cdf_on_support(scale: f64, bound: f64, x: f64) -> f64 {
    if x <= -bound {
        return 0.0;
    }
    if x >= bound {
        return 1.0;
    }
    let z = -(-bound / scale).exp_m1();
    if x < 0.0 {
        ((x / scale).exp() - (-bound / scale).exp()) / (2.0 * z)
    } else {
        0.5 + (-(-x / scale).exp_m1()) / (2.0 * z)
    }
}

/// Draws one truncated Laplace value.
pub fn tlap_sample<R: Rng + ?Sized>(spec: &TruncLapSpec, rng: &mut R) -> f64 {
    spec.sample(rng)
}

/// Numerically checks the `(ε, δ)` guarantee of adding truncated Laplace noise
/// to a query whose value moves by `shift` (`|shift| ≤ Δ`).
///
/// See [`dp_ratio_check_with_support`]; this uses the spec's own support.
pub fn tlap_dp_ratio_check(spec: &TruncLapSpec, shift: f64, grid: usize) -> Result<bool> {
    dp_ratio_check_with_support(spec, spec.bound(), shift, grid)
}

/// The `(ε, δ)` inequality on a discretised outcome space, with the noise
/// support overridden to `[−support, support]` (pass `spec.bound()` for the
/// real mechanism; smaller values model an under-truncated, leaky variant).
///
/// `[−A−Δ, A+Δ]` is cut into `grid` equal cells and the exact mass of both the
/// unshifted and the shifted law is computed per cell. For each direction,
/// cells are ranked by likelihood ratio and every upper-level set `S` is tested
/// against `P[S] ≤ e^ε Q[S] + δ + 2Δ·max_density/grid`. The upper-level sets
/// contain the maximiser of `P[S] − e^ε Q[S]`, so this covers every union of
/// cells.
pub fn dp_ratio_check_with_support(
    spec: &TruncLapSpec,
    support: f64,
    shift: f64,
    grid: usize,
) -> Result<bool> {
    if grid < 100 {
        return Err(Error::Precondition("grid must have at least 100 cells".into()));
    }
    if shift.abs() > spec.sensitivity() * (1.0 + 1e-12) {
        return Err(Error::Precondition("|shift| must not exceed the sensitivity".into()));
    }
    if !(support > 0.0) {
        return Err(invalid("support must be positive"));
    }
    let scale = spec.scale();
    let lo = -spec.bound() - spec.sensitivity();
    let hi = spec.bound() + spec.sensitivity();
    let width = (hi - lo) / grid as f64;
    let edges: Vec<f64> = (0..=grid).map(|i| lo + width * i as f64).collect();
    let mass = |offset: f64| -> Vec<f64> {
        edges
            .windows(2)
            .map(|w| {
                (cdf_on_support(scale, support, w[1] - offset)
                    - cdf_on_support(scale, support, w[0] - offset))
                .max(0.0)
            })
            .collect()
    };
    let base = mass(0.0);
    let moved = mass(shift);
    let max_density = density_on_support(scale, support, 0.0);
    let slack = 2.0 * spec.sensitivity() * max_density / grid as f64;
    let e_eps = spec.epsilon().exp();
    let holds = |p: &[f64], q: &[f64]| -> bool {
        let mut order: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
        let ratio = |i: usize| if q[i] > 0.0 { p[i] / q[i] } else { f64::INFINITY };
        order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)));
        let (mut ps, mut qs) = (0.0, 0.0);
        for i in order {
            ps += p[i];
            qs += q[i];
            if ps > e_eps * qs + spec.delta() + slack {
                return false;
            }
        }
        true
    };
    Ok(holds(&moved, &base) && holds(&base, &moved))
}

/// Output probabilities of the exponential mechanism,
/// `P(i) ∝ exp(ε·uᵢ / (2·sensitivity))`, via log-sum-exp.
pub fn exp_mech_probabilities(utilities: &[f64], sensitivity: f64, epsilon: f64) -> Result<Vec<f64>> {
    if utilities.is_empty() {
        return Err(invalid("exponential mechanism needs at least one candidate"));
    }
    if utilities.iter().any(|u| !u.is_finite()) {
        return Err(invalid("utilities must be finite"));
    }
    if !(sensitivity > 0.0) || !(epsilon > 0.0) {
        return Err(invalid("sensitivity and epsilon must be positive"));
    }
    let factor = epsilon / (2.0 * sensitivity);
    let logits: Vec<f64> = utilities.iter().map(|u| factor * u).collect();
    let best = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|l| (l - best).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Samples an index from the exponential mechanism.
pub fn exp_mech<R: Rng + ?Sized>(
    utilities: &[f64],
    sensitivity: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    let probs = exp_mech_probabilities(utilities, sensitivity, epsilon)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    // u landed in the rounding gap above the final partial sum
    Ok(probs.iter().rposition(|&p| p > 0.0).unwrap_or(0))
}

/// Budget of `k` adaptive `(ε, δ)` steps:
/// `(√(2k·ln(1/δ'))·ε + k·ε·(e^ε − 1), k·δ + δ')`.
pub fn advanced_composition(k: usize, eps: f64, delta: f64, delta_prime: f64) -> Result<PrivacyBudget> {
    if k == 0 {
        return Err(invalid("composition needs k ≥ 1"));
    }
    if !(delta_prime > 0.0) {
        return Err(invalid("delta' must be positive"));
    }
    if !(eps > 0.0) || !(delta >= 0.0) {
        return Err(invalid("per-step epsilon must be positive and delta nonnegative"));
    }
    let kf = k as f64;
    let epsilon = (2.0 * kf * (1.0 / delta_prime).ln()).sqrt() * eps + kf * eps * eps.exp_m1();
    PrivacyBudget::new(epsilon, kf * delta + delta_prime)
}

/// A record of the mechanisms run against one dataset.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BudgetLedger {
    charges: Vec<(String, PrivacyBudget)>,
}

impl BudgetLedger {
    pub fn charge(&mut self, label: impl Into<String>, budget: PrivacyBudget) {
        self.charges.push((label.into(), budget));
    }

    pub fn charges(&self) -> &[(String, PrivacyBudget)] {
        &self.charges
    }

    /// Basic composition: budgets add up.
    pub fn basic_total(&self) -> (f64, f64) {
        self.charges
            .iter()
            .fold((0.0, 0.0), |(e, d), (_, b)| (e + b.epsilon, d + b.delta))
    }

    /// Advanced composition over the recorded charges, using the largest
    /// per-step budget for every step.
    pub fn advanced_total(&self, delta_prime: f64) -> Result<PrivacyBudget> {
        let eps = self.charges.iter().map(|(_, b)| b.epsilon).fold(0.0, f64::max);
        let delta = self.charges.iter().map(|(_, b)| b.delta).fold(0.0, f64::max);
        advanced_composition(self.charges.len(), eps, delta, delta_prime)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn bound_matches_hand_value() {
        let spec = TruncLapSpec::new(1.0, 0.1, 0.05).unwrap();
        let expected = 10.0 * (1.0 + (0.1f64.exp() - 1.0) / 0.1).ln();
        assert!((spec.bound() - expected).abs() <= 1e-12 * expected);
        assert!((spec.bound() - 7.1867).abs() < 1e-4);
    }

    #[test]
    fn samples_respect_support() {
        let spec = TruncLapSpec::new(1.0, 0.1, 0.05).unwrap();
        let mut r = rng::stream(1);
        assert!((0..100_000).all(|_| spec.sample(&mut r).abs() <= spec.bound()));
        assert_eq!(spec.quantile(0.0), -spec.bound());
        assert_eq!(spec.quantile(1.0), spec.bound());
    }

    #[test]
    fn quantile_inverts_cdf() {
        let spec = TruncLapSpec::new(2.0, 0.7, 0.01).unwrap();
        for i in 1..100 {
            let u = i as f64 / 100.0;
            assert!((spec.cdf(spec.quantile(u)) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn median_is_zero() {
        let spec = TruncLapSpec::new(1.0, 0.5, 0.01).unwrap();
        let mut r = rng::stream(2);
        let below = (0..100_000).filter(|_| spec.sample(&mut r) <= 0.0).count();
        assert!((below as f64 / 1e5 - 0.5).abs() < 0.01);
    }

    #[test]
    fn dp_ratio_check_cases() {
        let spec = TruncLapSpec::new(1.0, 0.5, 0.05).unwrap();
        assert!(tlap_dp_ratio_check(&spec, 1.0, 20_000).unwrap());
        assert!(tlap_dp_ratio_check(&spec, -1.0, 20_000).unwrap());
        assert!(tlap_dp_ratio_check(&spec, 0.0, 1000).unwrap());
        let tight = TruncLapSpec::new(1.0, 0.5, 1e-9).unwrap();
        assert!(tlap_dp_ratio_check(&tight, 1.0, 200_000).unwrap());
        assert!(!dp_ratio_check_with_support(&tight, tight.bound() / 2.0, 1.0, 200_000).unwrap());
        assert!(tlap_dp_ratio_check(&spec, 1.0, 10).is_err());
        assert!(tlap_dp_ratio_check(&spec, 2.0, 1000).is_err());
    }

    #[test]
    fn exp_mech_dominant_candidate() {
        let mut r = rng::stream(3);
        assert!((0..10_000).all(|_| exp_mech(&[0.0, -1000.0], 1.0, 1.0, &mut r).unwrap() == 0));
        assert!(exp_mech(&[], 1.0, 1.0, &mut r).is_err());
    }

    #[test]
    fn exp_mech_uniform_when_tied() {
        let mut r = rng::stream(4);
        let mut counts = [0usize; 5];
        for _ in 0..100_000 {
            counts[exp_mech(&[3.0; 5], 1.0, 1.0, &mut r).unwrap()] += 1;
        }
        assert!(counts.iter().all(|&c| (c as f64 / 1e5 - 0.2).abs() < 0.02));
    }

    #[test]
    fn exp_mech_ratio_is_e() {
        let mut r = rng::stream(5);
        let mut counts = [0usize; 2];
        for _ in 0..100_000 {
            counts[exp_mech(&[0.0, -1.0], 1.0, 2.0, &mut r).unwrap()] += 1;
        }
        let ratio = counts[0] as f64 / counts[1] as f64;
        assert!((ratio / std::f64::consts::E - 1.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn composition_examples() {
        let b = advanced_composition(1, 1e-6, 0.0, 1e-6).unwrap();
        assert!((b.epsilon - 5.256e-6).abs() < 1e-9, "{}", b.epsilon);
        assert_eq!(b.delta, 1e-6);
        let b = advanced_composition(4, 0.1, 1e-8, 1e-6).unwrap();
        let expected = (8.0 * 1e6f64.ln()).sqrt() * 0.1 + 0.4 * 0.1f64.exp_m1();
        assert!((b.epsilon - expected).abs() < 1e-12);
        assert!((b.epsilon - 1.0934).abs() < 1e-4);
        assert!((b.delta - (4e-8 + 1e-6)).abs() < 1e-20);
        assert!(advanced_composition(0, 0.1, 0.0, 1e-6).is_err());
        assert!(advanced_composition(3, 0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn ledger_totals() {
        let mut l = BudgetLedger::default();
        l.charge("a", PrivacyBudget::new(0.5, 1e-6).unwrap());
        l.charge("b", PrivacyBudget::new(0.25, 0.0).unwrap());
        assert_eq!(l.basic_total(), (0.75, 1e-6));
        let adv = l.advanced_total(1e-6).unwrap();
        assert_eq!(adv, advanced_composition(2, 0.5, 1e-6, 1e-6).unwrap());
    }
}
