//! Total-variation distance between mixtures: certified adaptive quadrature in
//! one dimension, Monte Carlo in any dimension.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::Mixture;
use crate::quad;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TVEstimate {
    pub value: f64,
    pub method: Method,
    pub error_bound: f64,
    /// Standard error, Monte Carlo only.
    pub stderr: Option<f64>,
}

/// Default absolute tolerance for [`tv_univariate`].
pub const DEFAULT_TOL: f64 = 1e-6;

/// Minimum sample count accepted by [`tv_monte_carlo`].
pub const MIN_MC_SAMPLES: usize = 1000;

/// `½ ∫ |f − g|` for univariate mixtures. The integration window is the
/// union of all component windows; the domain is cut at every density
/// crossing so each piece is smooth. Components too narrow to sample at their
/// location in `f64` are handled exactly: on a cell where the sign of `f − g`
/// is fixed, `∫|f − g|` is the difference of the two CDF increments.
pub fn tv_univariate(m1: &Mixture, m2: &Mixture, tol: f64) -> Result<TVEstimate> {
    for m in [m1, m2] {
        if m.dim() != 1 {
            return Err(Error::UnsupportedDimension { d: m.dim(), max: 1 });
        }
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let grid = quad::breakpoints(&[m1, m2]);
    let cuts = quad::insert_sign_changes(&grid, |x| m1.log_density(&[x]) - m2.log_density(&[x]));
    let tail = quad::window_tail_bound();
    if !quad::resolvable(&[m1, m2]) {
        let value: f64 = cuts
            .windows(2)
            .map(|w| 0.5 * (quad::cell_mass(m1, w[0], w[1]) - quad::cell_mass(m2, w[0], w[1])).abs())
            .sum();
        return Ok(TVEstimate { value: value.clamp(0.0, 1.0), method: Method::Quadrature, error_bound: tol + tail, stderr: None });
    }
    let cell_tol = tol / (cuts.len() - 1).max(1) as f64;
    let mut total = quad::QuadResult::default();
    for w in cuts.windows(2) {
        total += quad::adaptive_simpson(
            |x| 0.5 * (m1.log_density(&[x]).exp() - m2.log_density(&[x]).exp()).abs(),
            w[0],
            w[1],
            cell_tol,
        );
    }
    // Outside the window each mixture has at most the tail bound of mass.
    Ok(TVEstimate {
        value: total.value.max(0.0),
        method: Method::Quadrature,
        error_bound: tol + tail,
        stderr: None,
    })
}

/// Monte Carlo estimate `E_{x∼m1}[max(0, 1 − g(x)/f(x))]`.
pub fn tv_monte_carlo(m1: &Mixture, m2: &Mixture, n: usize, seed: u64) -> Result<TVEstimate> {
    if m1.dim() != m2.dim() {
        return Err(Error::DimensionMismatch { expected: m1.dim(), got: m2.dim() });
    }
    if n < MIN_MC_SAMPLES {
        return Err(invalid(format!("Monte Carlo TV needs at least {MIN_MC_SAMPLES} samples")));
    }
    let data = m1.sample_with(n, &mut rng::stream(seed))?;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for x in data.rows() {
        let ratio = (m2.log_density(x) - m1.log_density(x)).exp();
        let v = (1.0 - ratio).max(0.0);
        sum += v;
        sum_sq += v * v;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    let stderr = (var / nf).sqrt();
    Ok(TVEstimate {
        value: mean,
        method: Method::MonteCarlo,
        error_bound: 3.0 * stderr,
        stderr: Some(stderr),
    })
}

/// Quadrature in one dimension, Monte Carlo with `mc_samples` draws otherwise.
pub fn tv_distance(m1: &Mixture, m2: &Mixture, mc_samples: usize, seed: u64) -> Result<TVEstimate> {
    if m1.dim() == 1 && m2.dim() == 1 {
        tv_univariate(m1, m2, DEFAULT_TOL)
    } else {
        tv_monte_carlo(m1, m2, mc_samples, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GaussianParams;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn phi(x: f64) -> f64 {
        Normal::new(0.0, 1.0).unwrap().cdf(x)
    }

    #[test]
    fn identical_mixtures_are_at_distance_zero() {
        let m = Mixture::univariate(&[(0.3, -1.0, 2.0), (0.7, 5.0, 0.1)]).unwrap();
        assert!(tv_univariate(&m, &m, 1e-6).unwrap().value < 1e-6);
    }

    #[test]
    fn sub_resolution_components_stay_in_range() {
        let truth = Mixture::univariate(&[(0.5, 0.0, 1.0), (0.5, 100.0, 25.0)]).unwrap();
        let spike = Mixture::univariate(&[(0.9, -303909085.58, 4.86e-17), (0.1, -61690670.7, 402493.4)]).unwrap();
        let got = tv_univariate(&truth, &spike, 1e-6).unwrap();
        assert!((got.value - 1.0).abs() < 1e-6, "{}", got.value);
        let near = Mixture::univariate(&[(0.5, 1e9, 1e-8), (0.5, 1e9 + 1.0, 1e-8)]).unwrap();
        let shifted = Mixture::univariate(&[(1.0, 1e9, 1e-8)]).unwrap();
        assert!((tv_univariate(&near, &shifted, 1e-6).unwrap().value - 0.5).abs() < 1e-6);
    }

    #[test]
    fn unit_shift_matches_closed_form() {
        let a = Mixture::univariate(&[(1.0, 0.0, 1.0)]).unwrap();
        let b = Mixture::univariate(&[(1.0, 1.0, 1.0)]).unwrap();
        let exact = 2.0 * phi(0.5) - 1.0;
        let got = tv_univariate(&a, &b, 1e-6).unwrap();
        assert!((got.value - exact).abs() < 1e-4);
        assert!((got.value - 0.38292).abs() < 1e-4);
    }

    #[test]
    fn separated_mixture_is_nearly_disjoint() {
        let a = Mixture::univariate(&[(1.0, 0.0, 1.0)]).unwrap();
        let b = Mixture::univariate(&[(0.5, -10.0, 1.0), (0.5, 10.0, 1.0)]).unwrap();
        let got = tv_univariate(&a, &b, 1e-6).unwrap();
        assert!((got.value - 1.0).abs() < 1e-4, "{}", got.value);
    }

    #[test]
    fn wide_versus_narrow_components() {
        // crossings of N(0,1) and N(0,σ²) at ±x*, x*² = 2 ln σ · σ²/(σ²−1)
        let s2: f64 = 1e-6;
        let a = Mixture::univariate(&[(1.0, 0.0, 1.0)]).unwrap();
        let b = Mixture::univariate(&[(1.0, 0.0, s2)]).unwrap();
        let x = (s2.ln() * s2 / (s2 - 1.0)).sqrt();
        let exact = (2.0 * phi(x / s2.sqrt()) - 1.0) - (2.0 * phi(x) - 1.0);
        let got = tv_univariate(&a, &b, 1e-7).unwrap();
        assert!((got.value - exact).abs() < 1e-5, "{} vs {}", got.value, exact);
    }

    #[test]
    fn rejects_multivariate_input() {
        let a = Mixture::single(GaussianParams::standard(2).unwrap());
        assert!(matches!(tv_univariate(&a, &a, 1e-6), Err(Error::UnsupportedDimension { .. })));
    }

    #[test]
    fn monte_carlo_identical_is_zero() {
        let a = Mixture::single(GaussianParams::standard(2).unwrap());
        let est = tv_monte_carlo(&a, &a, 5000, 1).unwrap();
        assert!(est.value.abs() <= est.error_bound + 1e-12);
        assert!(tv_monte_carlo(&a, &a, 10, 1).is_err());
    }
}
