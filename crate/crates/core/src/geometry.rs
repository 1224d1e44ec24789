//! The closeness relation `≈_{γ,ρ,τ}` on mean/covariance pairs, normalised
//! volume in parameter space, and numeric checks of the matrix inequalities
//! used alongside them.
//!
//! `(μ̂, Σ̂) ≈_{γ,ρ,τ} (μ, Σ)` when, with `M = Σ^{-1/2}Σ̂Σ^{-1/2}`,
//! `‖M − I‖_op ≤ γ`, `‖M − I‖_F ≤ ρ` and `‖Σ^{-1/2}(μ̂ − μ)‖ ≤ τ`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::model::GaussianParams;
use crate::rng;

/// Slack used when a computed quantity is compared against a bound.
const NUMERIC_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxParams {
    pub gamma: f64,
    pub rho: f64,
    pub tau: f64,
}

impl ApproxParams {
    pub fn new(gamma: f64, rho: f64, tau: f64) -> Result<Self> {
        if !(gamma > 0.0 && rho > 0.0 && tau > 0.0) {
            return Err(invalid("γ, ρ and τ must all be positive"));
        }
        Ok(ApproxParams { gamma, rho, tau })
    }

    /// `≈_{γ,τ}`, i.e. `ρ = √d·γ`.
    pub fn shorthand(gamma: f64, tau: f64, d: usize) -> Result<Self> {
        Self::new(gamma, (d as f64).sqrt() * gamma, tau)
    }

    pub fn scaled(&self, c: f64) -> Self {
        ApproxParams { gamma: c * self.gamma, rho: c * self.rho, tau: c * self.tau }
    }
}

/// Spectral, Frobenius and Mahalanobis distances of `hat` from `base`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxDistances {
    pub spectral: f64,
    pub frobenius: f64,
    pub mahalanobis: f64,
}

impl ApproxDistances {
    /// Bounds are compared with a relative slack of `1e-12` so that values
    /// sitting exactly on a bound are not lost to rounding.
    pub fn within(&self, p: &ApproxParams) -> bool {
        let le = |x: f64, b: f64| x <= b * (1.0 + NUMERIC_SLACK);
        le(self.spectral, p.gamma) && le(self.frobenius, p.rho) && le(self.mahalanobis, p.tau)
    }
}

pub fn approx_distances(hat: &GaussianParams, base: &GaussianParams) -> Result<ApproxDistances> {
    if hat.dim() != base.dim() {
        return Err(Error::DimensionMismatch { expected: base.dim(), got: hat.dim() });
    }
    let w = linalg::spd_inv_sqrt(base.cov())?;
    let d = base.dim();
    let m = linalg::symmetrize(&(&w * hat.cov() * &w)) - DMatrix::identity(d, d);
    Ok(ApproxDistances {
        spectral: linalg::sym_op_norm(&m),
        frobenius: linalg::frobenius(&m),
        mahalanobis: (&w * (hat.mean() - base.mean())).norm(),
    })
}

/// Whether `hat ≈_{γ,ρ,τ} base`.
pub fn approx_check(hat: &GaussianParams, base: &GaussianParams, p: &ApproxParams) -> Result<bool> {
    Ok(approx_distances(hat, base)?.within(p))
}

/// `(Σ^{1/2}μ₀ + μ, Σ^{1/2}Σ₀Σ^{1/2})`.
pub fn affine_push(p: &GaussianParams, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<GaussianParams> {
    let d = p.dim();
    if mu.len() != d || sigma.nrows() != d || sigma.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: mu.len() });
    }
    let root = linalg::spd_sqrt(sigma)?;
    push_with_root(p, mu, &root)
}

fn push_with_root(p: &GaussianParams, mu: &DVector<f64>, root: &DMatrix<f64>) -> Result<GaussianParams> {
    let mean = root * p.mean() + mu;
    let cov = linalg::symmetrize(&(root * p.cov() * root));
    GaussianParams::new(mean, cov)
}

/// `d(d+3)/2`, the dimension of parameter space.
pub fn proj_dim(d: usize) -> usize {
    d * (d + 3) / 2
}

/// The mean followed by the upper-triangular covariance entries.
pub fn proj(p: &GaussianParams) -> Vec<f64> {
    let mut v: Vec<f64> = p.mean().iter().copied().collect();
    v.extend(linalg::upper_triangle(p.cov()));
    v
}

fn unproj(d: usize, coords: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let mean = DVector::from_column_slice(&coords[..d]);
    let cov = linalg::from_upper_triangle(d, &coords[d..]);
    (mean, cov)
}

/// Axis-aligned box in parameter coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub d: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(d: usize, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let k = proj_dim(d);
        if d == 0 || lo.len() != k || hi.len() != k {
            return Err(invalid(format!("parameter box for d = {d} needs {k} coordinates")));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(h > l) || !l.is_finite() || !h.is_finite()) {
            return Err(invalid("parameter box is degenerate"));
        }
        Ok(ParamBox { d, lo, hi })
    }

    /// Box `center ± half_width` in every coordinate.
    pub fn around(center: &GaussianParams, half_width: f64) -> Result<Self> {
        let c = proj(center);
        Self::new(
            center.dim(),
            c.iter().map(|x| x - half_width).collect(),
            c.iter().map(|x| x + half_width).collect(),
        )
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    /// Smallest box containing the image of this box under
    /// `(μ₀, Σ₀) ↦ (Σ^{1/2}μ₀ + μ, Σ^{1/2}Σ₀Σ^{1/2})`. The map is affine in
    /// parameter coordinates, so the image box follows from its Jacobian.
    pub fn push(&self, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<Self> {
        let d = self.d;
        let root = linalg::spd_sqrt(sigma)?;
        let linear = |coords: &[f64]| -> Vec<f64> {
            let (m, s) = unproj(d, coords);
            let mut v: Vec<f64> = (&root * m).iter().copied().collect();
            v.extend(linalg::upper_triangle(&(&root * s * &root)));
            v
        };
        let k = proj_dim(d);
        let center: Vec<f64> = self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect();
        let mut c = linear(&center);
        for (ci, m) in c.iter_mut().zip(mu.iter()) {
            *ci += m;
        }
        let mut half = vec![0.0; k];
        for l in 0..k {
            let mut e = vec![0.0; k];
            e[l] = 1.0;
            let col = linear(&e);
            let hw = 0.5 * (self.hi[l] - self.lo[l]);
            for (h, j) in half.iter_mut().zip(col) {
                *h += j.abs() * hw;
            }
        }
        Self::new(d, c.iter().zip(&half).map(|(x, h)| x - h).collect(), c.iter().zip(&half).map(|(x, h)| x + h).collect())
    }
}

/// A bounded region of parameter space: a membership predicate on a box.
pub struct ParamRegion<'a> {
    pub bbox: ParamBox,
    pub contains: Box<dyn Fn(&GaussianParams) -> bool + Sync + 'a>,
}

impl<'a> ParamRegion<'a> {
    pub fn new(bbox: ParamBox, contains: impl Fn(&GaussianParams) -> bool + Sync + 'a) -> Self {
        ParamRegion { bbox, contains: Box::new(contains) }
    }

    /// The whole box.
    pub fn full(bbox: ParamBox) -> Self {
        Self::new(bbox, |_| true)
    }

    /// `{p : p ≈_{γ,ρ,τ} base}` inside the box `proj(base) ± half_width`.
    pub fn approx_ball(base: GaussianParams, p: ApproxParams, half_width: f64) -> Result<ParamRegion<'a>> {
        let bbox = ParamBox::around(&base, half_width)?;
        Ok(Self::new(bbox, move |q| approx_check(q, &base, &p).unwrap_or(false)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Minimum sample count accepted by [`nvol_mc`].
pub const MIN_NVOL_SAMPLES: usize = 10_000;

const NVOL_CHUNK: usize = 4096;

/// Monte Carlo estimate of `∫_region det(Σ)^{-(d+2)/2} dProj(μ, Σ)`.
pub fn nvol_mc(region: &ParamRegion<'_>, n: usize, seed: u64) -> Result<VolumeEstimate> {
    if n < MIN_NVOL_SAMPLES {
        return Err(invalid(format!("nvol needs at least {MIN_NVOL_SAMPLES} samples")));
    }
    let b = &region.bbox;
    let d = b.d;
    let chunks = n.div_ceil(NVOL_CHUNK);
    let (sum, sum_sq) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(rng::derive_seed(seed, &[c as u64]));
            let count = NVOL_CHUNK.min(n - c * NVOL_CHUNK);
            let mut coords = vec![0.0; b.lo.len()];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                for (x, (l, h)) in coords.iter_mut().zip(b.lo.iter().zip(&b.hi)) {
                    *x = r.random_range(*l..*h);
                }
                let (mean, cov) = unproj(d, &coords);
                let v = match GaussianParams::new(mean, cov) {
                    Ok(p) if (region.contains)(&p) => (-(d as f64 + 2.0) / 2.0 * p.log_det()).exp(),
                    _ => 0.0,
                };
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    let vol = b.volume();
    Ok(VolumeEstimate { value: mean * vol, stderr: (var / nf).sqrt() * vol })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetRatio {
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
}

impl DetRatio {
    pub fn holds(&self) -> bool {
        self.lower * (1.0 - NUMERIC_SLACK) <= self.ratio && self.ratio <= self.upper * (1.0 + NUMERIC_SLACK)
    }
}

/// `det(I + νM)/det(I + M)` with the bounds `ν^{-d}` and `ν^d`, for symmetric
/// `M` with `‖M‖_op ≤ 0.1` and `ν ∈ [1, 2]`.
pub fn det_ratio_bounds(m: &DMatrix<f64>, nu: f64) -> Result<DetRatio> {
    if !linalg::is_symmetric(m, 1e-12) {
        return Err(invalid("M must be symmetric"));
    }
    let op = linalg::sym_op_norm(m);
    if op > 0.1 + NUMERIC_SLACK {
        return Err(Error::Precondition(format!("‖M‖_op = {op} exceeds 0.1")));
    }
    if !(1.0..=2.0).contains(&nu) {
        return Err(Error::Precondition(format!("ν = {nu} is outside [1, 2]")));
    }
    let d = m.nrows();
    let eig = nalgebra::SymmetricEigen::new(linalg::symmetrize(m)).eigenvalues;
    // product over eigenvalues avoids two separate determinants
    let ratio = eig.iter().map(|l| (1.0 + nu * l) / (1.0 + l)).product();
    let di = d as i32;
    Ok(DetRatio { ratio, lower: nu.powi(-di), upper: nu.powi(di) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JmjTerms {
    pub phi: f64,
    pub lhs: f64,
    pub rhs: f64,
}

impl JmjTerms {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + NUMERIC_SLACK) + f64::MIN_POSITIVE
    }
}

/// `φ = ‖JJᵀ − I‖_op`, `‖JᵀMJ‖_F²` and `(1 + 3φ)‖M‖_F²`.
pub fn jmj_terms(m: &DMatrix<f64>, j: &DMatrix<f64>) -> Result<JmjTerms> {
    let d = m.nrows();
    if !m.is_square() || j.nrows() != d || !j.is_square() {
        return Err(Error::DimensionMismatch { expected: d, got: j.nrows() });
    }
    if !linalg::is_symmetric(m, 1e-12) {
        return Err(invalid("M must be symmetric"));
    }
    let phi = linalg::sym_op_norm(&(j * j.transpose() - DMatrix::identity(d, d)));
    if phi > 1.0 {
        return Err(Error::Precondition(format!("φ = {phi} exceeds 1")));
    }
    let lhs = (j.transpose() * m * j).norm_squared();
    let rhs = (1.0 + 3.0 * phi) * m.norm_squared();
    Ok(JmjTerms { phi, lhs, rhs })
}

/// Whether `‖JᵀMJ‖_F² ≤ (1 + 3φ)‖M‖_F²`.
pub fn jmj_check(m: &DMatrix<f64>, j: &DMatrix<f64>) -> Result<bool> {
    Ok(jmj_terms(m, j)?.holds())
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Symmetric matrix from the Gaussian orthogonal ensemble, rescaled so its
/// operator norm is uniform on `[0, max_op]`.
pub fn random_symmetric<R: Rng + ?Sized>(d: usize, max_op: f64, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(d, d, rng);
    let s = linalg::symmetrize(&g);
    let op = linalg::sym_op_norm(&s);
    let target = max_op * rng.random::<f64>();
    if op > 0.0 {
        s * (target / op)
    } else {
        s
    }
}

/// Haar-distributed orthogonal matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let qr = gaussian_matrix(d, d, rng).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for i in 0..d {
        if r[(i, i)] < 0.0 {
            q.column_mut(i).neg_mut();
        }
    }
    q
}

/// `U·diag(s)·Vᵀ` with Haar `U`, `V` and singular values uniform on `[lo, hi]`.
pub fn random_with_singular_values<R: Rng + ?Sized>(d: usize, lo: f64, hi: f64, rng: &mut R) -> DMatrix<f64> {
    let u = random_orthogonal(d, rng);
    let v = random_orthogonal(d, rng);
    let s = DVector::from_fn(d, |_, _| rng.random_range(lo..=hi));
    u * DMatrix::from_diagonal(&s) * v.transpose()
}

/// Random SPD matrix with eigenvalues log-uniform on `[lo, hi]`.
pub fn random_spd<R: Rng + ?Sized>(d: usize, lo: f64, hi: f64, rng: &mut R) -> DMatrix<f64> {
    let q = random_orthogonal(d, rng);
    let vals = DVector::from_fn(d, |_, _| (rng.random_range(lo.ln()..=hi.ln())).exp());
    linalg::symmetrize(&(&q * DMatrix::from_diagonal(&vals) * q.transpose()))
}

pub fn random_gaussian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> GaussianParams {
    let mean = DVector::from_fn(d, |_, _| 3.0 * Distribution::<f64>::sample(&StandardNormal, rng));
    GaussianParams::new(mean, random_spd(d, 0.1, 10.0, rng)).expect("random SPD matrix")
}

/// A random `hat` with `hat ≈_{γ,ρ,τ} base`, built by choosing
/// `Σ^{-1/2}Σ̂Σ^{-1/2} − I` and the whitened mean shift inside the allowed
/// norms. Requires `γ < 1`.
pub fn random_approx<R: Rng + ?Sized>(base: &GaussianParams, p: &ApproxParams, rng: &mut R) -> Result<GaussianParams> {
    if !(p.gamma < 1.0) {
        return Err(invalid("γ must be below 1 to keep the covariance positive definite"));
    }
    let d = base.dim();
    let e = linalg::symmetrize(&gaussian_matrix(d, d, rng));
    let (op, fro) = (linalg::sym_op_norm(&e), linalg::frobenius(&e));
    let scale = if op > 0.0 { (p.gamma / op).min(p.rho / fro) * rng.random::<f64>() } else { 0.0 };
    let m = DMatrix::identity(d, d) + e * scale;
    let dir: DVector<f64> = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
    let len = p.tau * rng.random::<f64>();
    let v = if dir.norm() > 0.0 { dir.normalize() * len } else { dir };
    let root = linalg::spd_sqrt(base.cov())?;
    let cov = linalg::symmetrize(&(&root * m * &root));
    GaussianParams::new(&root * v + base.mean(), cov)
}
