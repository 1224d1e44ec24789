//! Gaussians, mixtures, datasets and privacy budgets.
//!
//! All types validate their invariants on construction and are immutable
//! afterwards, so they can be shared freely across threads.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::rng;

/// Absolute tolerance for covariance symmetry and for weights summing to one.
pub const MODEL_TOL: f64 = 1e-9;

/// Mean and positive definite covariance of one Gaussian component.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "GaussianJson", try_from = "GaussianJson")]
pub struct GaussianParams {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct GaussianJson {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl From<GaussianParams> for GaussianJson {
    fn from(g: GaussianParams) -> Self {
        GaussianJson {
            mean: g.mean.iter().copied().collect(),
            cov: matrix_rows(&g.cov),
        }
    }
}

impl TryFrom<GaussianJson> for GaussianParams {
    type Error = Error;
    fn try_from(j: GaussianJson) -> Result<Self> {
        GaussianParams::from_rows(j.mean, j.cov)
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl PartialEq for GaussianParams {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: cov.nrows() });
        }
        if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
            return Err(invalid("non-finite Gaussian parameter"));
        }
        if !linalg::is_symmetric(&cov, MODEL_TOL) {
            return Err(invalid("covariance is not symmetric"));
        }
        let cov = linalg::symmetrize(&cov);
        let chol = Cholesky::new(cov.clone())
            .ok_or(Error::NotPositiveDefinite)?
            .l();
        let diag_log: f64 = (0..d).map(|i| chol[(i, i)].ln()).sum();
        if !diag_log.is_finite() || (0..d).any(|i| !(chol[(i, i)] > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        let log_norm = -0.5 * d as f64 * (2.0 * PI).ln() - diag_log;
        Ok(GaussianParams { mean, cov, chol, log_norm })
    }

    /// One-dimensional Gaussian `N(mu, var)`.
    pub fn univariate(mu: f64, var: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mu), DMatrix::from_element(1, 1, var))
    }

    pub fn from_rows(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d || cov.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: cov.len() });
        }
        let flat: Vec<f64> = cov.into_iter().flatten().collect();
        Self::new(DVector::from_vec(mean), DMatrix::from_row_slice(d, d, &flat))
    }

    /// Standard normal `N(0, I_d)`.
    pub fn standard(d: usize) -> Result<Self> {
        Self::new(DVector::zeros(d), DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower Cholesky factor of the covariance.
    pub fn cholesky(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Standard deviation of a univariate Gaussian (the `(0,0)` Cholesky entry).
    pub fn std_dev(&self) -> f64 {
        self.chol[(0, 0)]
    }

    pub fn log_det(&self) -> f64 {
        -2.0 * (self.log_norm + 0.5 * self.dim() as f64 * (2.0 * PI).ln())
    }

    /// Log density at `x`. The caller guarantees `x.len() == self.dim()`.
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        if d == 1 {
            let z = (x[0] - self.mean[0]) / self.chol[(0, 0)];
            return self.log_norm - 0.5 * z * z;
        }
        // forward substitution L y = x - mu
        let mut y = [0.0_f64; 8];
        let mut heap;
        let y: &mut [f64] = if d <= 8 {
            &mut y[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut quad = 0.0;
        for i in 0..d {
            let mut acc = x[i] - self.mean[i];
            for j in 0..i {
                acc -= self.chol[(i, j)] * y[j];
            }
            y[i] = acc / self.chol[(i, i)];
            quad += y[i] * y[i];
        }
        self.log_norm - 0.5 * quad
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Writes one draw into `out` using the Cholesky factor.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dim();
        let mut stack = [0.0_f64; 8];
        let mut heap;
        let z: &mut [f64] = if d <= 8 {
            &mut stack[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let mut acc = self.mean[i];
            for j in 0..=i {
                acc += self.chol[(i, j)] * z[j];
            }
            out[i] = acc;
        }
    }
}

/// One weighted mixture component.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub params: GaussianParams,
}

/// A finite Gaussian mixture. Weights are nonnegative and sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MixtureJson", try_from = "MixtureJson")]
pub struct Mixture {
    d: usize,
    components: Vec<Component>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ComponentJson {
    weight: f64,
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MixtureJson {
    d: usize,
    components: Vec<ComponentJson>,
}

impl From<Mixture> for MixtureJson {
    fn from(m: Mixture) -> Self {
        MixtureJson {
            d: m.d,
            components: m
                .components
                .into_iter()
                .map(|c| ComponentJson {
                    weight: c.weight,
                    mean: c.params.mean.iter().copied().collect(),
                    cov: matrix_rows(&c.params.cov),
                })
                .collect(),
        }
    }
}

impl TryFrom<MixtureJson> for Mixture {
    type Error = Error;
    fn try_from(j: MixtureJson) -> Result<Self> {
        let comps = j
            .components
            .into_iter()
            .map(|c| Ok((c.weight, GaussianParams::from_rows(c.mean, c.cov)?)))
            .collect::<Result<Vec<_>>>()?;
        let m = Mixture::new(comps)?;
        if m.d != j.d {
            return Err(Error::DimensionMismatch { expected: j.d, got: m.d });
        }
        Ok(m)
    }
}

impl Mixture {
    pub fn new(components: Vec<(f64, GaussianParams)>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| invalid("mixture needs at least one component"))?;
        let d = first.1.dim();
        let mut total = 0.0;
        for (w, g) in &components {
            if g.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: g.dim() });
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(invalid(format!("mixture weight {w} is not a nonnegative number")));
            }
            total += w;
        }
        if (total - 1.0).abs() > MODEL_TOL {
            return Err(invalid(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Mixture {
            d,
            components: components
                .into_iter()
                .map(|(weight, params)| Component { weight, params })
                .collect(),
        })
    }

    pub fn single(params: GaussianParams) -> Self {
        Mixture { d: params.dim(), components: vec![Component { weight: 1.0, params }] }
    }

    /// Univariate mixture from `(weight, mean, variance)` triples.
    pub fn univariate(parts: &[(f64, f64, f64)]) -> Result<Self> {
        Self::new(
            parts
                .iter()
                .map(|&(w, mu, var)| Ok((w, GaussianParams::univariate(mu, var)?)))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Components with strictly positive weight.
    pub fn active(&self) -> impl Iterator<Item = &Component> {
        self.components.iter().filter(|c| c.weight > 0.0)
    }

    /// Log of the mixture density, computed with log-sum-exp. Returns
    /// `-inf` where every component underflows. No dimension check.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut terms = [0.0_f64; 16];
        let mut heap = Vec::new();
        let n = self.components.len();
        let buf: &mut [f64] = if n <= 16 {
            &mut terms[..n]
        } else {
            heap.resize(n, 0.0);
            &mut heap
        };
        for (slot, c) in buf.iter_mut().zip(&self.components) {
            *slot = if c.weight > 0.0 {
                c.weight.ln() + c.params.log_pdf(x)
            } else {
                f64::NEG_INFINITY
            };
            best = best.max(*slot);
        }
        if best == f64::NEG_INFINITY {
            return best;
        }
        best + buf.iter().map(|t| (t - best).exp()).sum::<f64>().ln()
    }

    /// Mixture density `Σ wᵢ N(x; μᵢ, Σᵢ)`.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self
            .components
            .iter()
            .map(|c| c.weight * c.params.pdf(x))
            .sum())
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: x.len() });
        }
        Ok(())
    }

    /// For a univariate mixture, the interval spanned by every component's
    /// `mean ± width · std_dev`.
    pub fn univariate_window(&self, width: f64) -> (f64, f64) {
        self.components.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), c| {
                let (m, s) = (c.params.mean[0], c.params.std_dev());
                (lo.min(m - width * s), hi.max(m + width * s))
            },
        )
    }

    /// Draws one point into `out`.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        chooser: &WeightedIndex<f64>,
        out: &mut [f64],
    ) {
        let i = chooser.sample(rng);
        self.components[i].params.sample_into(rng, out);
    }

    pub(crate) fn chooser(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(self.components.iter().map(|c| c.weight))
            .expect("weights validated at construction")
    }

    /// `n` draws from a caller-supplied generator.
    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        if n == 0 {
            return Err(invalid("sample count must be at least 1"));
        }
        let chooser = self.chooser();
        let mut points = vec![0.0; n * self.d];
        for row in points.chunks_exact_mut(self.d) {
            self.sample_into(rng, &chooser, row);
        }
        Dataset::new(self.d, points)
    }
}

/// `n` i.i.d. draws from `mix`, deterministic in `seed`.
pub fn sample(mix: &Mixture, n: usize, seed: u64) -> Result<Dataset> {
    mix.sample_with(n, &mut rng::stream(seed))
}

/// Mixture density at `x`.
pub fn density(mix: &Mixture, x: &[f64]) -> Result<f64> {
    mix.density(x)
}

/// Closed-form upper bound on the total variation distance between two
/// Gaussians: `max(‖Σ₁^{-1/2} Σ₂ Σ₁^{-1/2} − I‖_F, ‖Σ₁^{-1/2}(μ₁ − μ₂)‖₂) / √2`.
pub fn tv_upper_bound(g1: &GaussianParams, g2: &GaussianParams) -> Result<f64> {
    if g1.dim() != g2.dim() {
        return Err(Error::DimensionMismatch { expected: g1.dim(), got: g2.dim() });
    }
    if g1.dim() == 1 {
        let (s1, v2) = (g1.std_dev(), g2.cov[(0, 0)]);
        let spec = (v2 / (s1 * s1) - 1.0).abs();
        let maha = ((g1.mean[0] - g2.mean[0]) / s1).abs();
        return Ok(spec.max(maha) / std::f64::consts::SQRT_2);
    }
    let w = linalg::spd_inv_sqrt(&g1.cov)?;
    let d = g1.dim();
    let m = &w * &g2.cov * &w - DMatrix::identity(d, d);
    let shift = &w * (&g1.mean - &g2.mean);
    Ok(m.norm().max(shift.norm()) / std::f64::consts::SQRT_2)
}

/// A finite `(ε, δ)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(invalid(format!("delta must lie in [0, 1), got {delta}")));
        }
        Ok(PrivacyBudget { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.0)
    }
}

/// `n` points in `R^d`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    d: usize,
    points: Vec<f64>,
}

impl Dataset {
    pub fn new(d: usize, points: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if points.is_empty() || !points.len().is_multiple_of(d) {
            return Err(invalid(format!(
                "{} values do not form a nonempty set of {d}-dimensional points",
                points.len()
            )));
        }
        if let Some(bad) = points.iter().find(|x| !x.is_finite()) {
            return Err(invalid(format!("non-finite data value {bad}")));
        }
        Ok(Dataset { d, points })
    }

    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: r.len() });
        }
        Self::new(d, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.d)
    }

    /// Flat row-major values; for `d = 1` these are the samples themselves.
    pub fn values(&self) -> &[f64] {
        &self.points
    }

    /// Rows `start..end` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> Result<Dataset> {
        if start >= end || end > self.n() {
            return Err(invalid(format!("row range {start}..{end} invalid for n = {}", self.n())));
        }
        Dataset::new(self.d, self.points[start * self.d..end * self.d].to_vec())
    }

    /// Reads headerless CSV, one sample per row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| invalid(format!("bad number {f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    /// Writes headerless CSV using shortest round-trip decimal formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for row in self.rows() {
            wtr.write_record(row.iter().map(|x| format!("{x:?}")))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn to_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

    fn n01() -> GaussianParams {
        GaussianParams::univariate(0.0, 1.0).unwrap()
    }

    #[test]
    fn density_standard_normal_mode() {
        let m = Mixture::single(n01());
        assert!((m.density(&[0.0]).unwrap() - INV_SQRT_2PI).abs() < 1e-12);
    }

    #[test]
    fn density_identical_components_collapse() {
        let m = Mixture::univariate(&[(0.5, 0.0, 1.0), (0.5, 0.0, 1.0)]).unwrap();
        assert!((m.density(&[0.0]).unwrap() - INV_SQRT_2PI).abs() < 1e-12);
    }

    #[test]
    fn density_two_component_hand_value() {
        let m = Mixture::univariate(&[(0.3, 0.0, 1.0), (0.7, 4.0, 4.0)]).unwrap();
        let phi = |z: f64| INV_SQRT_2PI * (-0.5 * z * z).exp();
        let expected = 0.3 * phi(2.0) + 0.7 * 0.5 * phi(1.0);
        let got = m.density(&[2.0]).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.100887).abs() < 1e-6);
        assert!((m.log_density(&[2.0]) - got.ln()).abs() < 1e-12);
    }

    #[test]
    fn density_dimension_mismatch() {
        let m = Mixture::single(n01());
        assert!(matches!(m.density(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn multivariate_log_pdf_matches_formula() {
        let g = GaussianParams::from_rows(vec![1.0, -1.0], vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let x = [0.3, 0.2];
        let cov = g.cov().clone();
        let diff = DVector::from_row_slice(&[x[0] - 1.0, x[1] + 1.0]);
        let inv = cov.clone().try_inverse().unwrap();
        let q = (diff.transpose() * inv * &diff)[(0, 0)];
        let expected = -(2.0 * PI).ln() - 0.5 * cov.determinant().ln() - 0.5 * q;
        assert!((g.log_pdf(&x) - expected).abs() < 1e-12);
        assert!((g.log_det() - cov.determinant().ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            GaussianParams::univariate(0.0, 0.0),
            Err(Error::NotPositiveDefinite)
        ));
        assert!(GaussianParams::from_rows(vec![0.0, 0.0], vec![vec![1.0, 0.1], vec![0.2, 1.0]]).is_err());
        assert!(GaussianParams::from_rows(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(Mixture::univariate(&[(0.5, 0.0, 1.0), (0.6, 0.0, 1.0)]).is_err());
        assert!(Mixture::univariate(&[(-0.1, 0.0, 1.0), (1.1, 0.0, 1.0)]).is_err());
        assert!(Mixture::new(vec![]).is_err());
        assert!(PrivacyBudget::new(0.0, 0.1).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
        assert!(Dataset::univariate(vec![f64::NAN]).is_err());
        assert!(Dataset::univariate(vec![]).is_err());
    }

    #[test]
    fn sample_moments_standard_normal() {
        let data = sample(&Mixture::single(n01()), 100_000, 11).unwrap();
        let v = data.values();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn sample_zero_weight_component_is_never_drawn() {
        let m = Mixture::univariate(&[(1.0, 0.0, 1.0), (0.0, 1e6, 1.0)]).unwrap();
        let data = sample(&m, 5000, 3).unwrap();
        assert!(data.values().iter().all(|x| x.abs() < 100.0));
    }

    #[test]
    fn sample_is_deterministic() {
        let m = Mixture::univariate(&[(0.4, -2.0, 1.0), (0.6, 3.0, 0.5)]).unwrap();
        let a = sample(&m, 1000, 99).unwrap();
        let b = sample(&m, 1000, 99).unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn tv_upper_bound_examples() {
        let same = tv_upper_bound(&n01(), &n01()).unwrap();
        assert_eq!(same, 0.0);
        let shifted = tv_upper_bound(&n01(), &GaussianParams::univariate(1.0, 1.0).unwrap()).unwrap();
        assert!((shifted - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        let wider = tv_upper_bound(&n01(), &GaussianParams::univariate(0.0, 2.0).unwrap()).unwrap();
        assert!((wider - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        let i2 = GaussianParams::standard(2).unwrap();
        assert!(tv_upper_bound(&i2, &i2).unwrap() < 1e-12);
    }

    #[test]
    fn mixture_json_schema() {
        let m = Mixture::new(vec![(
            1.0,
            GaussianParams::from_rows(vec![1.0, 2.0], vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap(),
        )])
        .unwrap();
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"d": 2, "components": [
                {"weight": 1.0, "mean": [1.0, 2.0], "cov": [[1.0, 0.0], [0.0, 2.0]]}
            ]})
        );
        let back: Mixture = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
        let bad = serde_json::json!({"d": 3, "components": [{"weight": 1.0, "mean": [0.0], "cov": [[1.0]]}]});
        assert!(serde_json::from_value::<Mixture>(bad).is_err());
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let m = Mixture::univariate(&[(0.5, 0.1, 1e-7), (0.5, 1e12, 3.0)]).unwrap();
        let data = sample(&m, 200, 5).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, data);
    }
}
