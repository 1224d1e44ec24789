//! Private crude candidates for univariate mixtures.
//!
//! The sorted sample is turned into consecutive `(location, gap)` pairs; each
//! pair with a positive gap lands in a dyadic bucket `(a, b)` where
//! `2^a ≤ gap < 2^{a+1}` and `b·n⁵·2^a ≤ location < (b+1)·n⁵·2^a`. Bucket
//! counts receive truncated Laplace noise `TLap(1, ε/10, δ/10)` and every
//! bucket whose noisy count exceeds `(100/ε)·ln(1/δ)` yields the candidate
//! `(b·n⁵·2^a, 2^{2a})`.
//!
//! Changing one sample changes at most three pairs, so the count vector moves
//! by at most 6 in ℓ1 and the released set is `(ε, δ)`-DP. Empty buckets never
//! cross the threshold because the noise is bounded below it, so noise is only
//! drawn for buckets that are actually populated.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mech::TruncLapSpec;
use crate::model::{Dataset, GaussianParams, PrivacyBudget};

/// Largest sample size for which `n⁵` is computed.
pub const MAX_N: usize = 1_000_000;

/// Consecutive pair `(Y_j, Y_{j+1} − Y_j)` of the sorted sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapPair {
    pub r: f64,
    pub s: f64,
}

impl GapPair {
    fn total_cmp(&self, other: &Self) -> Ordering {
        self.r.total_cmp(&other.r).then(self.s.total_cmp(&other.s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BucketKey {
    pub a: i32,
    pub b: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub mu: f64,
    pub var: f64,
    pub a: i32,
    pub b: i64,
}

impl Candidate {
    pub fn to_gaussian(&self) -> Result<GaussianParams> {
        GaussianParams::univariate(self.mu, self.var)
    }

    /// `2^a`, the candidate's scale.
    pub fn scale(&self) -> f64 {
        pow2(self.a)
    }
}

/// Candidates released by [`noisy_candidates`], sorted by `(a, b)`.
/// Serialises as `[{"mu", "var", "a", "b"}, ...]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Candidate> {
        self.candidates.iter()
    }
}

fn univariate_values(data: &Dataset) -> Result<&[f64]> {
    if data.dim() != 1 {
        return Err(Error::UnsupportedDimension { d: data.dim(), max: 1 });
    }
    Ok(data.values())
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut y = values.to_vec();
    y.sort_by(f64::total_cmp);
    y
}

/// The `n − 1` pairs `(Y_j, Y_{j+1} − Y_j)` of the ascending sort.
pub fn consecutive_pairs(data: &Dataset) -> Result<Vec<GapPair>> {
    let values = univariate_values(data)?;
    if values.len() < 2 {
        return Err(invalid("at least two samples are needed"));
    }
    Ok(pairs_of_sorted(&sorted(values)))
}

fn pairs_of_sorted(y: &[f64]) -> Vec<GapPair> {
    y.windows(2).map(|w| GapPair { r: w[0], s: w[1] - w[0] }).collect()
}

/// Minimum number of unmatched elements over all pairings of two equal-size
/// multisets, under exact equality.
pub fn multiset_distance(z: &[GapPair], zp: &[GapPair]) -> Result<usize> {
    if z.len() != zp.len() {
        return Err(invalid(format!("multiset sizes differ: {} vs {}", z.len(), zp.len())));
    }
    let mut a = z.to_vec();
    let mut b = zp.to_vec();
    a.sort_by(GapPair::total_cmp);
    b.sort_by(GapPair::total_cmp);
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].total_cmp(&b[j]) {
            Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
        }
    }
    Ok(a.len() - common)
}

/// `floor(log2 s)` read from the binary exponent, exact at powers of two.
pub fn floor_log2(s: f64) -> Result<i32> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(invalid(format!("gap must be positive and finite, got {s}")));
    }
    let bits = s.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    if exp == 0 {
        // subnormal: value = mantissa · 2^-1074
        let mantissa = bits & ((1u64 << 52) - 1);
        Ok(-1074 + (63 - mantissa.leading_zeros() as i32))
    } else {
        Ok(exp - 1023)
    }
}

/// Exact `2^e` for `e` in the normal and subnormal range.
pub fn pow2(e: i32) -> f64 {
    if e > 1023 {
        f64::INFINITY
    } else if e >= -1022 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else if e >= -1074 {
        f64::from_bits(1u64 << (e + 1074))
    } else {
        0.0
    }
}

/// `x · 2^e` without intermediate overflow for moderate results.
fn scale_pow2(x: f64, e: i32) -> f64 {
    let mut x = x;
    let mut e = e;
    while e > 1000 {
        x *= pow2(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= pow2(-1000);
        e += 1000;
    }
    x * pow2(e)
}

/// `n⁵` as an integer, then rounded once to `f64`.
pub fn n_pow5(n: usize) -> Result<f64> {
    if n > MAX_N {
        return Err(Error::Config(format!("n = {n} exceeds the supported maximum {MAX_N}")));
    }
    Ok((n as u128).pow(5) as f64)
}

/// Bucket of a pair with positive gap `s`.
pub fn bucket_key(r: f64, s: f64, n: usize) -> Result<BucketKey> {
    if n < 2 {
        return Err(invalid("n must be at least 2"));
    }
    let a = floor_log2(s)?;
    let n5 = n_pow5(n)?;
    Ok(BucketKey { a, b: location_cell(r, n5, a)? })
}

fn location_cell(r: f64, n5: f64, a: i32) -> Result<i64> {
    let width = scale_pow2(n5, a);
    let q = scale_pow2(r / n5, -a).floor();
    if !q.is_finite() || q.abs() >= 9.0e18 {
        return Err(invalid(format!("location {r} is out of range for bucketing")));
    }
    let mut b = q as i64;
    // repair division rounding so that b·w ≤ r < (b+1)·w
    if width.is_finite() && width > 0.0 {
        while (b as f64) * width > r {
            b -= 1;
        }
        while ((b + 1) as f64) * width <= r {
            b += 1;
        }
    }
    Ok(b)
}

/// Exact (noiseless) bucket counts of a univariate dataset. Zero gaps are
/// skipped.
pub fn bucket_counts(data: &Dataset) -> Result<BTreeMap<BucketKey, u64>> {
    let values = univariate_values(data)?;
    counts_of_sorted(&sorted(values))
}

fn counts_of_sorted(y: &[f64]) -> Result<BTreeMap<BucketKey, u64>> {
    let n = y.len();
    let mut counts = BTreeMap::new();
    if n < 2 {
        return Ok(counts);
    }
    for p in pairs_of_sorted(y) {
        if p.s > 0.0 {
            *counts.entry(bucket_key(p.r, p.s, n)?).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

/// Threshold `(100/ε)·ln(1/δ)` a noisy count must exceed.
pub fn candidate_threshold(budget: &PrivacyBudget) -> f64 {
    100.0 / budget.epsilon * (1.0 / budget.delta).ln()
}

/// Noise law added to each populated bucket: `TLap(1, ε/10, δ/10)`.
pub fn count_noise(budget: &PrivacyBudget) -> Result<TruncLapSpec> {
    TruncLapSpec::new(1.0, budget.epsilon / 10.0, budget.delta / 10.0)
}

/// `(ε, δ)`-DP crude candidates for a univariate dataset.
pub fn noisy_candidates<R: Rng + ?Sized>(
    data: &Dataset,
    budget: &PrivacyBudget,
    rng: &mut R,
) -> Result<CandidateSet> {
    let values = univariate_values(data)?;
    if values.len() < 2 {
        return Err(invalid("at least two samples are needed"));
    }
    if !(budget.epsilon <= 1.0 && budget.delta > 0.0) {
        return Err(invalid("candidate stage needs ε ∈ (0, 1] and δ ∈ (0, 1)"));
    }
    let n = values.len();
    let n5 = n_pow5(n)?;
    let counts = counts_of_sorted(&sorted(values))?;
    let noise = count_noise(budget)?;
    let threshold = candidate_threshold(budget);
    let mut candidates = Vec::new();
    // BTreeMap iteration is (a, b)-sorted, which fixes the noise draw order.
    for (key, count) in counts {
        let noisy = count as f64 + noise.sample(rng);
        if noisy > threshold {
            let scale = pow2(key.a);
            let var = pow2(2 * key.a);
            if !(var > 0.0 && var.is_finite()) {
                return Err(invalid(format!("gap scale 2^{} has no representable variance", key.a)));
            }
            candidates.push(Candidate {
                mu: key.b as f64 * n5 * scale,
                var,
                a: key.a,
                b: key.b,
            });
        }
    }
    Ok(CandidateSet { candidates })
}

/// Whether `x` and `y` differ in at most one element as multisets and have the
/// same size.
pub fn are_adjacent(x: &Dataset, y: &Dataset) -> bool {
    if x.n() != y.n() || x.dim() != y.dim() {
        return false;
    }
    let mut a: Vec<&[f64]> = x.rows().collect();
    let mut b: Vec<&[f64]> = y.rows().collect();
    let cmp = |p: &&[f64], q: &&[f64]| {
        p.iter()
            .zip(q.iter())
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    };
    a.sort_by(cmp);
    b.sort_by(cmp);
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match cmp(&a[i], &b[j]) {
            Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
        }
    }
    a.len() - common <= 1
}

/// `Σ_e |c_e(X) − c_e(X')|` over all buckets, for adjacent datasets.
pub fn count_l1_sensitivity(x: &Dataset, xp: &Dataset) -> Result<u64> {
    univariate_values(x)?;
    univariate_values(xp)?;
    if !are_adjacent(x, xp) {
        return Err(invalid("datasets are not adjacent"));
    }
    let cx = bucket_counts(x)?;
    let cy = bucket_counts(xp)?;
    let mut total = 0u64;
    for (k, v) in &cx {
        total += v.abs_diff(*cy.get(k).unwrap_or(&0));
    }
    for (k, v) in &cy {
        if !cx.contains_key(k) {
            total += v;
        }
    }
    Ok(total)
}

/// Number of sorted indices `j` with `Y_j ∈ [μ − σ, μ + σ]` and
/// `σ/(10⁴n⁴) ≤ Y_{j+1} − Y_j ≤ 2σ`: the pairs that certify a component.
pub fn recovery_count(data: &Dataset, mu: f64, sigma: f64) -> Result<usize> {
    let values = univariate_values(data)?;
    let n = values.len() as f64;
    let lo_gap = sigma / (1e4 * n.powi(4));
    let y = sorted(values);
    Ok(y.windows(2)
        .filter(|w| {
            let gap = w[1] - w[0];
            w[0] >= mu - sigma && w[0] <= mu + sigma && gap >= lo_gap && gap <= 2.0 * sigma
        })
        .count())
}

/// Whether a candidate crudely covers `N(μ, σ²)`: `2^a ∈ [σ/(10⁵n⁴), 2σ]` and
/// `μ̂ ∈ [μ − σ − n⁵·2^a, μ + σ]`.
pub fn candidate_covers(c: &Candidate, mu: f64, sigma: f64, n: usize) -> Result<bool> {
    let n5 = n_pow5(n)?;
    let scale = c.scale();
    let nf = n as f64;
    let scale_ok = scale >= sigma / (1e5 * nf.powi(4)) && scale <= 2.0 * sigma;
    let loc_ok = c.mu >= mu - sigma - n5 * scale && c.mu <= mu + sigma;
    Ok(scale_ok && loc_ok)
}

/// Gap regularity of a univariate sample at resolution `l`: every value has
/// `|x| ≤ l`, and no `window` consecutive sorted values fit in an interval of
/// width `2/l`.
pub fn gap_regularity_holds(data: &Dataset, window: usize, l: f64) -> Result<bool> {
    let values = univariate_values(data)?;
    if window < 2 {
        return Err(invalid("window must be at least 2"));
    }
    if values.iter().any(|x| x.abs() > l) {
        return Ok(false);
    }
    let y = sorted(values);
    Ok(y.windows(window).all(|w| w[window - 1] - w[0] > 2.0 / l))
}
