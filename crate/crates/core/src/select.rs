//! Private hypothesis selection: Scheffé sets, minimum-distance scores and the
//! exponential mechanism over them.
//!
//! For hypotheses `H_i`, `H_j` the Scheffé set is `A_ij = {x : h_i(x) > h_j(x)}`.
//! The score of `H_i` is `max_{j≠i} |P_{H_i}(A_ij) − P̂(A_ij)|` where `P̂` is the
//! empirical measure. Replacing one sample moves each `P̂(A_ij)` by at most
//! `1/n`, so `n·score` has sensitivity 1.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mech::exp_mech;
use crate::model::{Dataset, Mixture};
use crate::nets::HypothesisClass;
use crate::quad;
use crate::rng;
use crate::tvdist::Method;

/// Default Monte Carlo sample count for Scheffé masses in `d ≥ 2`.
pub const DEFAULT_MC_SAMPLES: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrationSpec {
    /// Absolute tolerance of one-dimensional quadrature.
    pub tol: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for IntegrationSpec {
    fn default() -> Self {
        IntegrationSpec { tol: 1e-4, mc_samples: DEFAULT_MC_SAMPLES, seed: 0 }
    }
}

/// `P_target(A_ij)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassEstimate {
    pub value: f64,
    pub method: Method,
    pub stderr: Option<f64>,
}

/// One Scheffé comparison: model mass against the data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheffeEstimate {
    pub mass: f64,
    pub empirical: f64,
    pub method: Method,
    pub mc_stderr: Option<f64>,
}

fn check_dims(ms: &[&Mixture]) -> Result<usize> {
    let d = ms[0].dim();
    for m in &ms[1..] {
        if m.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: m.dim() });
        }
    }
    Ok(d)
}

/// Whether `x ∈ A_ij`. Exact ties are outside.
pub fn scheffe_membership(h_i: &Mixture, h_j: &Mixture, x: &[f64]) -> Result<bool> {
    check_dims(&[h_i, h_j])?;
    h_i.check_point(x)?;
    Ok(h_i.log_density(x) > h_j.log_density(x))
}

/// `P_target(A_ij)`: adaptive quadrature in one dimension, Monte Carlo with
/// `spec.mc_samples` draws seeded by `spec.seed` otherwise.
pub fn scheffe_mass(h_i: &Mixture, h_j: &Mixture, target: &Mixture, spec: &IntegrationSpec) -> Result<MassEstimate> {
    let d = check_dims(&[h_i, h_j, target])?;
    if h_i == h_j {
        let method = if d == 1 { Method::Quadrature } else { Method::MonteCarlo };
        return Ok(MassEstimate { value: 0.0, method, stderr: None });
    }
    if d == 1 {
        Ok(MassEstimate { value: mass_quadrature(h_i, h_j, target, spec.tol)?, method: Method::Quadrature, stderr: None })
    } else {
        let (value, stderr) = mass_monte_carlo(h_i, h_j, target, spec.mc_samples, spec.seed)?;
        Ok(MassEstimate { value, method: Method::MonteCarlo, stderr: Some(stderr) })
    }
}

/// Quadrature in one dimension regardless of the default choice.
pub fn mass_quadrature(h_i: &Mixture, h_j: &Mixture, target: &Mixture, tol: f64) -> Result<f64> {
    if check_dims(&[h_i, h_j, target])? != 1 {
        return Err(Error::UnsupportedDimension { d: h_i.dim(), max: 1 });
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let diff = |x: f64| h_i.log_density(&[x]) - h_j.log_density(&[x]);
    let grid = quad::breakpoints(&[h_i, h_j, target]);
    let cuts = quad::insert_sign_changes(&grid, diff);
    let cell_tol = tol / (cuts.len() - 1).max(1) as f64;
    let exact = !quad::resolvable(&[h_i, h_j, target]);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if !(diff(0.5 * (w[0] + w[1])) > 0.0) {
            continue;
        }
        total += if exact {
            quad::cell_mass(target, w[0], w[1])
        } else {
            quad::adaptive_simpson(|x| target.log_density(&[x]).exp(), w[0], w[1], cell_tol).value
        };
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Monte Carlo estimate and standard error of `P_target(A_ij)`.
pub fn mass_monte_carlo(h_i: &Mixture, h_j: &Mixture, target: &Mixture, n: usize, seed: u64) -> Result<(f64, f64)> {
    check_dims(&[h_i, h_j, target])?;
    if n < 2 {
        return Err(invalid("Monte Carlo needs at least two samples"));
    }
    let data = target.sample_with(n, &mut rng::stream(seed))?;
    let hits = data.rows().filter(|x| h_i.log_density(x) > h_j.log_density(x)).count();
    let p = hits as f64 / n as f64;
    Ok((p, (p * (1.0 - p) / n as f64).sqrt()))
}

/// Fraction of rows of `data` in `A_ij`.
pub fn empirical_mass(h_i: &Mixture, h_j: &Mixture, data: &Dataset) -> Result<f64> {
    check_dims(&[h_i, h_j])?;
    if data.dim() != h_i.dim() {
        return Err(Error::DimensionMismatch { expected: h_i.dim(), got: data.dim() });
    }
    if data.n() == 0 {
        return Err(invalid("dataset is empty"));
    }
    let hits = data.rows().filter(|x| h_i.log_density(x) > h_j.log_density(x)).count();
    Ok(hits as f64 / data.n() as f64)
}

/// Model and empirical mass of `A_ij`, the model mass taken under `H_i`.
pub fn scheffe_estimate(h_i: &Mixture, h_j: &Mixture, data: &Dataset, spec: &IntegrationSpec) -> Result<ScheffeEstimate> {
    let m = scheffe_mass(h_i, h_j, h_i, spec)?;
    Ok(ScheffeEstimate {
        mass: m.value,
        empirical: empirical_mass(h_i, h_j, data)?,
        method: m.method,
        mc_stderr: m.stderr,
    })
}

fn check_class(class: &HypothesisClass, data: &Dataset) -> Result<()> {
    if class.is_empty() {
        return Err(invalid("hypothesis class is empty"));
    }
    if data.n() == 0 {
        return Err(invalid("dataset is empty"));
    }
    for h in class.iter() {
        if h.dim() != data.dim() {
            return Err(Error::DimensionMismatch { expected: data.dim(), got: h.dim() });
        }
    }
    Ok(())
}

/// `n × M` log-density table, one row per hypothesis.
fn log_density_table(class: &HypothesisClass, data: &Dataset) -> Vec<Vec<f64>> {
    class
        .hypotheses
        .par_iter()
        .map(|h| data.rows().map(|x| h.log_density(x)).collect())
        .collect()
}

/// Minimum-distance scores of every hypothesis against `data`. A class of
/// one scores zero. In `d ≥ 2` the masses `P_{H_i}(A_ij)` for a fixed `i`
/// share one Monte Carlo sample from `H_i`.
pub fn mde_scores(class: &HypothesisClass, data: &Dataset, spec: &IntegrationSpec) -> Result<Vec<f64>> {
    check_class(class, data)?;
    let m = class.len();
    if m == 1 {
        return Ok(vec![0.0]);
    }
    let table = log_density_table(class, data);
    let n = data.n() as f64;
    let hyps = &class.hypotheses;
    let d = data.dim();
    (0..m)
        .into_par_iter()
        .map(|i| {
            let draws = if d == 1 {
                None
            } else {
                let pts = hyps[i].sample_with(spec.mc_samples, &mut rng::stream(rng::derive_seed(spec.seed, &[i as u64])))?;
                let own: Vec<f64> = pts.rows().map(|x| hyps[i].log_density(x)).collect();
                Some((pts, own))
            };
            let mut score: f64 = 0.0;
            for j in 0..m {
                if j == i {
                    continue;
                }
                let hits = table[i].iter().zip(&table[j]).filter(|(a, b)| a > b).count();
                let emp = hits as f64 / n;
                let mass = match &draws {
                    None => mass_quadrature(&hyps[i], &hyps[j], &hyps[i], spec.tol)?,
                    Some((pts, own)) => {
                        let inside = pts.rows().zip(own).filter(|(x, &li)| li > hyps[j].log_density(x)).count();
                        inside as f64 / spec.mc_samples as f64
                    }
                };
                score = score.max((mass - emp).abs());
            }
            Ok(score)
        })
        .collect()
}

/// Outcome of [`private_select`]. Serialises as
/// `{"chosen", "scores", "epsilon", "n"}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub chosen: usize,
    pub scores: Vec<f64>,
    pub epsilon: f64,
    pub n: usize,
}

/// `ε`-DP choice from `class`: the exponential mechanism with utility
/// `−n·score` and sensitivity 1.
pub fn private_select<R: Rng + ?Sized>(
    class: &HypothesisClass,
    data: &Dataset,
    epsilon: f64,
    spec: &IntegrationSpec,
    rng: &mut R,
) -> Result<(Mixture, SelectionReport)> {
    check_class(class, data)?;
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    let scores = mde_scores(class, data, spec)?;
    let chosen = if class.len() == 1 {
        0
    } else {
        let n = data.n() as f64;
        let utilities: Vec<f64> = scores.iter().map(|s| -n * s).collect();
        exp_mech(&utilities, 1.0, epsilon, rng)?
    };
    let report = SelectionReport { chosen, scores, epsilon, n: data.n() };
    Ok((class.hypotheses[chosen].clone(), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample, GaussianParams};
    use statrs::distribution::{ContinuousCDF, Normal};

    fn uni(mu: f64, var: f64) -> Mixture {
        Mixture::univariate(&[(1.0, mu, var)]).unwrap()
    }

    #[test]
    fn membership_examples() {
        let a = uni(0.0, 1.0);
        assert!(!scheffe_membership(&a, &a, &[0.3]).unwrap());
        let b = uni(2.0, 1.0);
        assert!(scheffe_membership(&a, &b, &[0.0]).unwrap());
        assert!(!scheffe_membership(&a, &b, &[2.0]).unwrap());
        let c = uni(0.0, 4.0);
        assert!(scheffe_membership(&a, &c, &[0.0]).unwrap());
        assert!(!scheffe_membership(&a, &c, &[5.0]).unwrap());
        let two = Mixture::single(GaussianParams::standard(2).unwrap());
        assert!(scheffe_membership(&a, &two, &[0.0]).is_err());
    }

    #[test]
    fn mass_examples() {
        let phi = |x: f64| Normal::new(0.0, 1.0).unwrap().cdf(x);
        let a = uni(0.0, 1.0);
        let b = uni(2.0, 1.0);
        let spec = IntegrationSpec::default();
        assert_eq!(scheffe_mass(&a, &a, &b, &spec).unwrap().value, 0.0);
        assert!((scheffe_mass(&a, &b, &a, &spec).unwrap().value - phi(1.0)).abs() < 1e-4);
        assert!((scheffe_mass(&a, &b, &b, &spec).unwrap().value - phi(-1.0)).abs() < 1e-4);
    }

    #[test]
    fn monte_carlo_mass_matches_quadrature() {
        let a = Mixture::univariate(&[(0.4, -1.0, 0.5), (0.6, 2.0, 2.0)]).unwrap();
        let b = uni(0.5, 3.0);
        let q = mass_quadrature(&a, &b, &a, 1e-6).unwrap();
        let (p, se) = mass_monte_carlo(&a, &b, &a, 50_000, 3).unwrap();
        assert!((p - q).abs() <= 4.0 * se, "{p} vs {q} ± {se}");
    }

    #[test]
    fn truth_scores_low() {
        let truth = Mixture::univariate(&[(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)]).unwrap();
        let class = HypothesisClass::from_mixtures(vec![truth.clone(), uni(0.0, 4.0), uni(3.0, 1.0)], 0.5).unwrap();
        let data = sample(&truth, 10_000, 5).unwrap();
        let scores = mde_scores(&class, &data, &IntegrationSpec::default()).unwrap();
        assert!(scores[0] <= 0.05, "{scores:?}");
        assert!(scores[1] > scores[0] && scores[2] > scores[0]);
    }

    #[test]
    fn huge_epsilon_picks_argmin() {
        let truth = uni(0.0, 1.0);
        let class = HypothesisClass::from_mixtures(vec![uni(5.0, 1.0), truth.clone(), uni(-5.0, 1.0)], 0.5).unwrap();
        let data = sample(&truth, 2000, 1).unwrap();
        let mut r = rng::stream(2);
        let (chosen, report) = private_select(&class, &data, 1e6, &IntegrationSpec::default(), &mut r).unwrap();
        assert_eq!(report.chosen, 1);
        assert_eq!(chosen, truth);
        let v = serde_json::to_value(&report).unwrap();
        assert_eq!(v["n"], 2000);
    }

    #[test]
    fn singleton_class_is_returned() {
        let class = HypothesisClass::from_mixtures(vec![uni(1.0, 1.0)], 1.0).unwrap();
        let data = Dataset::univariate(vec![0.0]).unwrap();
        let (m, r) = private_select(&class, &data, 1.0, &IntegrationSpec::default(), &mut rng::stream(0)).unwrap();
        assert_eq!(m, uni(1.0, 1.0));
        assert_eq!(r.chosen, 0);
    }
}
