//! Finite Gaussian covers of crude balls and the mixture hypothesis classes
//! built from them.
//!
//! A crude ball around `(μ̂, Σ̂)` with radius `G` holds every `N(μ, Σ)` with
//! `‖Σ̂^{-1/2}(μ − μ̂)‖ ≤ G` and `Σ̂/G ≼ Σ ≼ G·Σ̂`. Covers are built in the
//! whitened frame and pushed forward by `μ₀ ↦ Σ̂^{1/2}μ₀ + μ̂`,
//! `Σ₀ ↦ Σ̂^{1/2}Σ₀Σ̂^{1/2}`. They are indexable rather than materialised:
//! for realistic `G` they have far more elements than fit in memory.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::model::{GaussianParams, Mixture};
use crate::rng;

/// Largest dimension for which covers are built by default.
pub const DEFAULT_D_MAX: usize = 3;

/// Largest `1/ζ` accepted by [`weight_grid`].
pub const MAX_WEIGHT_STEPS: usize = 40;

/// Largest cover [`gaussian_cover`] will write out as a list.
pub const MAX_MATERIALIZED: u128 = 5_000_000;

/// Raw products up to this size are enumerated exactly before capping.
const ENUMERATION_LIMIT: u128 = 2_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrudeBall {
    pub center: GaussianParams,
    #[serde(rename = "G")]
    pub g: f64,
}

impl CrudeBall {
    pub fn new(center: GaussianParams, g: f64) -> Result<Self> {
        if !(g >= 1.0) || !g.is_finite() {
            return Err(invalid(format!("ball radius G must be a finite number ≥ 1, got {g}")));
        }
        Ok(CrudeBall { center, g })
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Membership with relative slack `tol` on both constraints.
    pub fn contains(&self, p: &GaussianParams, tol: f64) -> Result<bool> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.dim() });
        }
        let w = linalg::spd_inv_sqrt(self.center.cov())?;
        let shift = &w * (p.mean() - self.center.mean());
        if shift.norm() > self.g * (1.0 + tol) {
            return Ok(false);
        }
        let inner = linalg::symmetrize(&(&w * p.cov() * &w));
        let eig = nalgebra::SymmetricEigen::new(inner).eigenvalues;
        Ok(eig.min() >= (1.0 - tol) / self.g && eig.max() <= self.g * (1.0 + tol))
    }
}

/// Evenly spaced values from `lo` to `hi` inclusive, last step possibly short.
#[derive(Clone, Copy, Debug)]
struct Axis {
    lo: f64,
    hi: f64,
    step: f64,
    count: u128,
}

impl Axis {
    fn arithmetic(lo: f64, hi: f64, step: f64) -> Result<Self> {
        let span = ((hi - lo) / step).ceil();
        if !(span.is_finite() && span < 1e37) {
            return Err(Error::Config("cover axis is too fine to index".into()));
        }
        let count = if hi > lo { span as u128 + 1 } else { 1 };
        Ok(Axis { lo, hi, step, count })
    }

    fn value(&self, i: u128) -> f64 {
        if i + 1 >= self.count {
            self.hi
        } else {
            self.lo + i as f64 * self.step
        }
    }
}

/// `lo·r^i` from `lo` to `hi` inclusive, last step possibly short.
#[derive(Clone, Copy, Debug)]
struct GeoAxis {
    lo: f64,
    hi: f64,
    ratio: f64,
    count: u128,
}

impl GeoAxis {
    fn new(lo: f64, hi: f64, ratio: f64) -> Self {
        let count = if hi > lo { ((hi / lo).ln() / ratio.ln()).ceil() as u128 + 1 } else { 1 };
        GeoAxis { lo, hi, ratio, count }
    }

    fn value(&self, i: u128) -> f64 {
        if i + 1 >= self.count {
            self.hi
        } else {
            self.lo * self.ratio.powi(i as i32)
        }
    }
}

#[derive(Clone, Debug)]
enum Grid {
    /// `(σ², μ)` grid, variance-major.
    Univariate { var: GeoAxis, mean: Axis },
    /// Lattice over whitened mean coordinates then upper-triangular
    /// covariance coordinates, projected back into the ball.
    Lattice { d: usize, mean: Axis, diag: Axis, off: Axis },
}

#[derive(Clone, Debug)]
struct GridCover {
    ball: CrudeBall,
    root: DMatrix<f64>,
    grid: Grid,
    len: u128,
}

#[derive(Clone, Debug)]
enum CoverKind {
    Explicit(Vec<GaussianParams>),
    Grid(Box<GridCover>),
}

/// An indexable finite set of Gaussians.
#[derive(Clone, Debug)]
pub struct Cover {
    kind: CoverKind,
}

impl Cover {
    pub fn explicit(items: Vec<GaussianParams>) -> Self {
        Cover { kind: CoverKind::Explicit(items) }
    }

    pub fn len(&self) -> u128 {
        match &self.kind {
            CoverKind::Explicit(v) => v.len() as u128,
            CoverKind::Grid(g) => g.len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, idx: u128) -> Result<GaussianParams> {
        if idx >= self.len() {
            return Err(invalid(format!("cover index {idx} out of range")));
        }
        match &self.kind {
            CoverKind::Explicit(v) => Ok(v[idx as usize].clone()),
            CoverKind::Grid(g) => g.element(idx),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<GaussianParams>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Writes the cover out; fails above [`MAX_MATERIALIZED`] elements.
    pub fn to_vec(&self) -> Result<Vec<GaussianParams>> {
        if self.len() > MAX_MATERIALIZED {
            return Err(Error::Config(format!(
                "cover has {} elements, more than the {MAX_MATERIALIZED} that can be listed",
                self.len()
            )));
        }
        self.iter().collect()
    }
}

impl GridCover {
    fn element(&self, idx: u128) -> Result<GaussianParams> {
        let g = self.ball.g;
        let (mu0, sigma0) = match &self.grid {
            Grid::Univariate { var, mean } => {
                let (vi, mi) = (idx / mean.count, idx % mean.count);
                (
                    DVector::from_element(1, mean.value(mi)),
                    DMatrix::from_element(1, 1, var.value(vi)),
                )
            }
            Grid::Lattice { d, mean, diag, off } => {
                let d = *d;
                let mut rest = idx;
                let mut digit = |axis: &Axis| {
                    let v = axis.value(rest % axis.count);
                    rest /= axis.count;
                    v
                };
                let mut mu = DVector::from_fn(d, |_, _| digit(mean));
                let mut coords = Vec::with_capacity(d * (d + 1) / 2);
                for i in 0..d {
                    for j in i..d {
                        coords.push(if i == j { digit(diag) } else { digit(off) });
                    }
                }
                let norm = mu.norm();
                if norm > g {
                    mu *= g / norm;
                }
                let cov = linalg::clamp_spectrum(&linalg::from_upper_triangle(d, &coords), 1.0 / g, g);
                (mu, cov)
            }
        };
        let mean = &self.root * mu0 + self.ball.center.mean();
        let cov = linalg::symmetrize(&(&self.root * sigma0 * &self.root));
        GaussianParams::new(mean, cov)
    }
}

/// `G' = G·√d/ζ`, the whitened-frame resolution.
pub fn resolution(g: f64, zeta: f64, d: usize) -> f64 {
    g * (d as f64).sqrt() / zeta
}

/// Size bound `(2G')^{d(d+3)}`.
pub fn cover_size_bound(g: f64, zeta: f64, d: usize) -> f64 {
    (2.0 * resolution(g, zeta, d)).powi((d * (d + 3)) as i32)
}

/// Indexable cover of `ball` at TV resolution `zeta`.
pub fn cover(ball: &CrudeBall, zeta: f64, d: usize, d_max: usize) -> Result<Cover> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(invalid(format!("zeta must lie in (0, 1), got {zeta}")));
    }
    if d == 0 || d > d_max {
        return Err(Error::UnsupportedDimension { d, max: d_max });
    }
    if ball.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: ball.dim() });
    }
    let g = ball.g;
    let gp = resolution(g, zeta, d);
    let df = d as f64;
    let root = linalg::spd_sqrt(ball.center.cov())?;
    let mean = Axis::arithmetic(-g, g, 2.0 / (gp * df.sqrt()))?;
    let overflow = || Error::Config("cover is too large to index".into());
    let (grid, len) = if d == 1 {
        let var = GeoAxis::new(1.0 / g, g, 1.0 + zeta / 2.0);
        let len = var.count.checked_mul(mean.count).ok_or_else(overflow)?;
        (Grid::Univariate { var, mean }, len)
    } else {
        let step = 2.0 / (gp * df);
        let diag = Axis::arithmetic(1.0 / g, g, step)?;
        let off = Axis::arithmetic(-g, g, step)?;
        let mut len: u128 = 1;
        for _ in 0..d {
            len = len.checked_mul(mean.count).ok_or_else(overflow)?;
        }
        for _ in 0..d {
            len = len.checked_mul(diag.count).ok_or_else(overflow)?;
        }
        for _ in 0..d * (d - 1) / 2 {
            len = len.checked_mul(off.count).ok_or_else(overflow)?;
        }
        (Grid::Lattice { d, mean, diag, off }, len)
    };
    Ok(Cover { kind: CoverKind::Grid(Box::new(GridCover { ball: ball.clone(), root, grid, len })) })
}

/// The cover of `ball` as a list, with the default dimension limit.
pub fn gaussian_cover(ball: &CrudeBall, zeta: f64, d: usize) -> Result<Vec<GaussianParams>> {
    cover(ball, zeta, d, DEFAULT_D_MAX)?.to_vec()
}

/// Number of grid steps `m` with `1/m ≤ zeta`, i.e. the effective weight step
/// is `1/m`.
pub fn weight_steps(zeta: f64) -> Result<usize> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(invalid(format!("weight step must lie in (0, 1], got {zeta}")));
    }
    let m = (1.0 / zeta - 1e-9).ceil().max(1.0);
    if m > MAX_WEIGHT_STEPS as f64 {
        return Err(Error::Config(format!(
            "weight grid needs {m} steps, more than the cap of {MAX_WEIGHT_STEPS}"
        )));
    }
    Ok(m as usize)
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn composition_numerators(k: usize, zeta: f64) -> Result<(usize, Vec<Vec<usize>>)> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let m = weight_steps(zeta)?;
    let count = binomial(m + k - 1, k - 1);
    if count > ENUMERATION_LIMIT {
        return Err(Error::Config(format!("weight grid has {count} vectors")));
    }
    Ok((m, compositions(m, k)))
}

fn binomial(n: usize, r: usize) -> u128 {
    let r = r.min(n - r);
    (0..r).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All length-`k` vectors of multiples of `1/m` summing to 1, with
/// `m = ⌈1/ζ⌉`, in lexicographic order.
pub fn weight_grid(k: usize, zeta: f64) -> Result<Vec<Vec<f64>>> {
    let (m, comps) = composition_numerators(k, zeta)?;
    Ok(comps
        .into_iter()
        .map(|c| c.into_iter().map(|x| x as f64 / m as f64).collect())
        .collect())
}

/// A hypothesis up to component order: sorted `(pool index, weight numerator)`
/// pairs with zero weights dropped.
type Key = Vec<(u128, usize)>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisClass {
    pub zeta: f64,
    pub truncated: bool,
    pub hypotheses: Vec<Mixture>,
}

impl HypothesisClass {
    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.hypotheses.first().map_or(0, Mixture::dim)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Mixture> {
        self.hypotheses.iter()
    }

    pub fn from_mixtures(hypotheses: Vec<Mixture>, zeta: f64) -> Result<Self> {
        let d = hypotheses.first().ok_or_else(|| invalid("hypothesis class is empty"))?.dim();
        if let Some(h) = hypotheses.iter().find(|h| h.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: h.dim() });
        }
        Ok(HypothesisClass { zeta, truncated: false, hypotheses })
    }
}

struct Pool<'a> {
    covers: &'a [Cover],
    len: u128,
}

impl Pool<'_> {
    fn get(&self, mut idx: u128) -> Result<GaussianParams> {
        for c in self.covers {
            if idx < c.len() {
                return c.get(idx);
            }
            idx -= c.len();
        }
        Err(invalid("pool index out of range"))
    }
}

fn key_of(weights: &[usize], slots: &[u128]) -> Key {
    let mut key: Key = slots
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0)
        .map(|(&s, &w)| (s, w))
        .collect();
    key.sort_unstable();
    key
}

/// Mixtures of at most `k` components drawn from the union of `covers`, with
/// weights on the `zeta` grid. Classes larger than `cap` are subsampled
/// uniformly (seeded) and flagged as truncated. Output is sorted canonically.
pub fn mixture_hypotheses(
    covers: &[Cover],
    k: usize,
    zeta: f64,
    cap: usize,
    seed: u64,
) -> Result<HypothesisClass> {
    let (m, weights) = composition_numerators(k, zeta)?;
    if cap == 0 {
        return Err(invalid("cap must be at least 1"));
    }
    let pool = Pool { covers, len: covers.iter().map(Cover::len).sum() };
    if pool.len == 0 {
        return Err(invalid("union of covers is empty"));
    }
    let mut rng = rng::stream(seed);
    let raw = (0..k)
        .try_fold(weights.len() as u128, |acc, _| acc.checked_mul(pool.len))
        .unwrap_or(u128::MAX);

    let (keys, truncated) = if raw <= ENUMERATION_LIMIT {
        let mut all = BTreeSet::new();
        let mut slots = vec![0u128; k];
        for w in &weights {
            slots.iter_mut().for_each(|s| *s = 0);
            loop {
                all.insert(key_of(w, &slots));
                // odometer over slot choices
                let mut i = 0;
                while i < k {
                    slots[i] += 1;
                    if slots[i] < pool.len {
                        break;
                    }
                    slots[i] = 0;
                    i += 1;
                }
                if i == k {
                    break;
                }
            }
        }
        if all.len() <= cap {
            (all, false)
        } else {
            let all: Vec<Key> = all.into_iter().collect();
            let chosen: BTreeSet<Key> = all.choose_multiple(&mut rng, cap).cloned().collect();
            (chosen, true)
        }
    } else {
        let mut chosen = BTreeSet::new();
        let max_attempts = cap.saturating_mul(20).saturating_add(1000);
        let mut slots = vec![0u128; k];
        for _ in 0..max_attempts {
            if chosen.len() >= cap {
                break;
            }
            let w = &weights[rng.random_range(0..weights.len())];
            for s in slots.iter_mut() {
                *s = rng.random_range(0..pool.len);
            }
            chosen.insert(key_of(w, &slots));
        }
        (chosen, true)
    };

    let hypotheses = keys
        .into_iter()
        .map(|key| {
            Mixture::new(
                key.into_iter()
                    .map(|(s, w)| Ok((w as f64 / m as f64, pool.get(s)?)))
                    .collect::<Result<Vec<_>>>()?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HypothesisClass { zeta: 1.0 / m as f64, truncated, hypotheses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tvdist::tv_univariate;

    fn ball1(mu: f64, var: f64, g: f64) -> CrudeBall {
        CrudeBall::new(GaussianParams::univariate(mu, var).unwrap(), g).unwrap()
    }

    #[test]
    fn small_cover_contains_center() {
        let b = ball1(0.0, 1.0, 1.0);
        let c = gaussian_cover(&b, 0.5, 1).unwrap();
        assert!(c.len() as f64 <= 256.0);
        let target = Mixture::univariate(&[(1.0, 0.0, 1.0)]).unwrap();
        let best = c
            .iter()
            .map(|p| tv_univariate(&target, &Mixture::single(p.clone()), 1e-6).unwrap().value)
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 0.5);
    }

    #[test]
    fn elements_lie_in_ball() {
        let b = ball1(3.0, 4.0, 4.0);
        for p in gaussian_cover(&b, 0.2, 1).unwrap() {
            assert!(b.contains(&p, 1e-9).unwrap());
        }
        let center = GaussianParams::from_rows(vec![1.0, -1.0], vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let b2 = CrudeBall::new(center, 1.5).unwrap();
        let c = cover(&b2, 0.9, 2, DEFAULT_D_MAX).unwrap();
        assert!((c.len() as f64) <= cover_size_bound(1.5, 0.9, 2));
        for i in (0..c.len()).step_by(97) {
            assert!(b2.contains(&c.get(i).unwrap(), 1e-9).unwrap());
        }
    }

    #[test]
    fn cover_is_affine_equivariant() {
        let a = gaussian_cover(&ball1(0.0, 1.0, 2.0), 0.3, 1).unwrap();
        let b = gaussian_cover(&ball1(5.0, 9.0, 2.0), 0.3, 1).unwrap();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.iter().zip(&b) {
            assert!((3.0 * p.mean()[0] + 5.0 - q.mean()[0]).abs() < 1e-9);
            assert!((9.0 * p.cov()[(0, 0)] - q.cov()[(0, 0)]).abs() < 1e-9);
        }
    }

    #[test]
    fn cover_errors() {
        let b = ball1(0.0, 1.0, 2.0);
        assert!(gaussian_cover(&b, 0.0, 1).is_err());
        let b4 = CrudeBall::new(GaussianParams::standard(4).unwrap(), 2.0).unwrap();
        assert!(matches!(gaussian_cover(&b4, 0.5, 4), Err(Error::UnsupportedDimension { .. })));
        assert!(CrudeBall::new(GaussianParams::standard(1).unwrap(), 0.5).is_err());
    }

    #[test]
    fn huge_covers_are_indexable() {
        let b = ball1(0.0, 1.0, 1e9);
        let c = cover(&b, 0.1, 1, DEFAULT_D_MAX).unwrap();
        assert!(c.len() > MAX_MATERIALIZED);
        assert!(c.to_vec().is_err());
        let last = c.get(c.len() - 1).unwrap();
        assert!(b.contains(&last, 1e-9).unwrap());
    }

    #[test]
    fn weight_grid_examples() {
        assert_eq!(weight_grid(2, 0.5).unwrap(), vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]]);
        assert_eq!(weight_grid(1, 0.25).unwrap(), vec![vec![1.0]]);
        assert_eq!(weight_grid(3, 1.0 / 3.0).unwrap().len(), 10);
        assert!(matches!(weight_grid(2, 0.01), Err(Error::Config(_))));
    }

    #[test]
    fn hypotheses_examples() {
        let g = |m: f64| GaussianParams::univariate(m, 1.0).unwrap();
        let one = mixture_hypotheses(&[Cover::explicit(vec![g(0.0)])], 1, 0.5, 100, 1).unwrap();
        assert_eq!(one.len(), 1);
        let three = [Cover::explicit(vec![g(0.0), g(1.0)]), Cover::explicit(vec![g(2.0)])];
        let h = mixture_hypotheses(&three, 2, 0.5, 100, 1).unwrap();
        assert_eq!(h.len(), 9);
        assert!(!h.truncated);
        for m in h.iter() {
            let total: f64 = m.components().iter().map(|c| c.weight).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        let capped = mixture_hypotheses(&three, 2, 0.5, 4, 1).unwrap();
        assert_eq!(capped.len(), 4);
        assert!(capped.truncated);
    }

    #[test]
    fn oversized_product_is_subsampled_to_cap() {
        let pool: Vec<GaussianParams> =
            (0..1000).map(|i| GaussianParams::univariate(i as f64, 1.0).unwrap()).collect();
        let h = mixture_hypotheses(&[Cover::explicit(pool)], 2, 1.0, 100, 7).unwrap();
        assert_eq!(h.len(), 100);
        assert!(h.truncated);
        let again = mixture_hypotheses(
            &[Cover::explicit((0..1000).map(|i| GaussianParams::univariate(i as f64, 1.0).unwrap()).collect())],
            2,
            1.0,
            100,
            7,
        )
        .unwrap();
        assert_eq!(h, again);
    }

    #[test]
    fn class_json_shape() {
        let h = mixture_hypotheses(&[Cover::explicit(vec![GaussianParams::univariate(0.0, 1.0).unwrap()])], 1, 0.5, 10, 0)
            .unwrap();
        let v = serde_json::to_value(&h).unwrap();
        assert_eq!(v["zeta"], 0.5);
        assert_eq!(v["truncated"], false);
        assert_eq!(v["hypotheses"].as_array().unwrap().len(), 1);
    }
}
