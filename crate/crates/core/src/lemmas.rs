//! Randomised and exhaustive checks of the properties the learners rely on.
//! Each suite returns a [`SuiteReport`]; the `check-lemmas` subcommand and the
//! acceptance tests print them.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{self, ApproxParams, ParamBox, ParamRegion};
use crate::linalg;
use crate::mech::{self, TruncLapSpec};
use crate::model::{sample, tv_upper_bound, Dataset, GaussianParams, Mixture, PrivacyBudget};
use crate::nets::{self, CrudeBall, HypothesisClass};
use crate::rng::{self, derive_seed};
use crate::select::{private_select, IntegrationSpec};
use crate::tvdist::{tv_monte_carlo, tv_univariate};
use crate::univariate::{self, consecutive_pairs, count_l1_sensitivity, multiset_distance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Violations tolerated before the suite counts as failed.
    pub allowed: usize,
    pub detail: String,
}

impl SuiteReport {
    fn new(name: &str, trials: usize, violations: usize, allowed: usize, detail: String) -> Self {
        SuiteReport { name: name.to_owned(), trials, violations, allowed, detail }
    }

    pub fn passed(&self) -> bool {
        self.violations <= self.allowed
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} violations in {} trials (allowed {}); {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.violations,
            self.trials,
            self.allowed,
            self.detail
        )
    }
}

fn all_multisets(n: usize, max: u8) -> Vec<Vec<f64>> {
    fn rec(n: usize, lo: u8, max: u8, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in lo..=max {
            cur.push(v as f64);
            rec(n, v, max, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, 0, max, &mut Vec::new(), &mut out);
    out
}

/// Worst gap-multiset distance and bucket-count ℓ1 change for one adjacent pair.
fn pair_sensitivity(x: &[f64], y: &[f64]) -> Result<(usize, u64)> {
    let (dx, dy) = (Dataset::univariate(x.to_vec())?, Dataset::univariate(y.to_vec())?);
    let dist = multiset_distance(&consecutive_pairs(&dx)?, &consecutive_pairs(&dy)?)?;
    Ok((dist, count_l1_sensitivity(&dx, &dy)?))
}

/// Gap-pair multisets move by at most 3 and bucket counts by at most 6 in ℓ1
/// between adjacent datasets: every integer dataset with `2 ≤ n ≤ 6` and
/// values in `{0..4}` against every one-point change, then `random_pairs`
/// real-valued pairs of size `n_random`.
pub fn sensitivity(seed: u64, random_pairs: usize, n_random: usize) -> Result<SuiteReport> {
    let mut seen: Vec<(usize, u64)> = Vec::new();
    for n in 2..=6 {
        for x in all_multisets(n, 4) {
            for i in 0..n {
                for v in 0..=4u8 {
                    if x[i] == v as f64 {
                        continue;
                    }
                    let mut y = x.clone();
                    y[i] = v as f64;
                    let (d, l1) = pair_sensitivity(&x, &y)?;
                    seen.push((d, l1));
                }
            }
        }
    }
    let exhaustive = seen.len();
    let mut r = rng::stream(seed);
    for _ in 0..random_pairs {
        let scale = 10f64.powf(r.random_range(-3.0..3.0));
        let x: Vec<f64> = (0..n_random).map(|_| scale * r.random_range(-1.0..1.0)).collect();
        let mut y = x.clone();
        let i = r.random_range(0..n_random);
        // sometimes collide with an existing value to exercise zero gaps
        y[i] = if r.random_bool(0.2) { x[r.random_range(0..n_random)] } else { scale * r.random_range(-2.0..2.0) };
        let (d, l1) = pair_sensitivity(&x, &y)?;
        seen.push((d, l1));
    }
    let violations = seen.iter().filter(|(d, l1)| *d > 3 || *l1 > 6).count();
    let worst = seen.iter().fold((0, 0), |w, &(d, l1)| (w.0.max(d), w.1.max(l1)));
    Ok(SuiteReport::new(
        "sensitivity",
        seen.len(),
        violations,
        0,
        format!("{exhaustive} exhaustive + {random_pairs} random pairs; max distance {}, max l1 {}", worst.0, worst.1),
    ))
}

fn random_tlap_spec<R: Rng + ?Sized>(r: &mut R) -> Result<TruncLapSpec> {
    let sens = r.random_range(0.5..2.0);
    let eps = r.random_range(0.05..1.0);
    let delta = 10f64.powf(r.random_range(-9.0..-1.0));
    TruncLapSpec::new(sens, eps, delta)
}

/// No truncated Laplace draw leaves `[−A, A]`.
pub fn tlap_support(seed: u64, specs: usize, draws: usize) -> Result<SuiteReport> {
    let mut r = rng::stream(seed);
    let specs: Vec<TruncLapSpec> = (0..specs).map(|_| random_tlap_spec(&mut r)).collect::<Result<_>>()?;
    let outside: usize = specs
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = rng::stream(derive_seed(seed, &[i as u64]));
            (0..draws).filter(|_| s.sample(&mut r).abs() > s.bound()).count()
        })
        .sum();
    Ok(SuiteReport::new(
        "tlap-support",
        specs.len() * draws,
        outside,
        0,
        format!("{} specs x {draws} draws", specs.len()),
    ))
}

/// `A(1, ε/10, δ/10) ≤ (100/ε)·ln(1/δ)` on the `grid × grid` lattice
/// `ε, δ ∈ {1/grid, …, 1}`.
pub fn tlap_bound_grid(grid: usize) -> Result<SuiteReport> {
    let mut failures = Vec::new();
    for i in 1..=grid {
        for j in 1..=grid {
            let (eps, delta) = (i as f64 / grid as f64, j as f64 / grid as f64);
            let a = mech::truncation_bound(1.0, eps / 10.0, delta / 10.0);
            if a > 100.0 / eps * (1.0 / delta).ln() {
                failures.push((eps, delta));
            }
        }
    }
    let detail = match failures.iter().map(|f| f.1).reduce(f64::min) {
        None => "bound holds at every grid point".to_owned(),
        Some(dmin) => format!(
            "bound fails at {} points, all with delta >= {dmin}; first at (eps, delta) = {:?}",
            failures.len(),
            failures[0]
        ),
    };
    Ok(SuiteReport::new("tlap-bound-grid", grid * grid, failures.len(), 0, detail))
}

/// The discretised `(ε, δ)` inequality for random specs and shifts.
pub fn tlap_dp(seed: u64, specs: usize, grid: usize) -> Result<SuiteReport> {
    let mut r = rng::stream(seed);
    let cases: Vec<(TruncLapSpec, f64)> = (0..specs)
        .map(|_| {
            let s = random_tlap_spec(&mut r)?;
            let shift = s.sensitivity() * r.random_range(-1.0..=1.0);
            Ok((s, shift))
        })
        .collect::<Result<_>>()?;
    let results = cases
        .par_iter()
        .map(|(s, shift)| mech::tlap_dp_ratio_check(s, *shift, grid))
        .collect::<Result<Vec<bool>>>()?;
    let bad = results.iter().filter(|ok| !**ok).count();
    Ok(SuiteReport::new("tlap-dp-ratio", specs, bad, 0, format!("grid {grid}")))
}

fn random_mixture<R: Rng + ?Sized>(r: &mut R, k: usize, mean_range: f64, var_range: (f64, f64)) -> Result<Mixture> {
    let raw: Vec<f64> = (0..k).map(|_| r.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let parts: Vec<(f64, f64, f64)> = raw
        .iter()
        .map(|w| {
            let var = (r.random_range(var_range.0.ln()..=var_range.1.ln())).exp();
            (w / total, r.random_range(-mean_range..=mean_range), var)
        })
        .collect();
    Mixture::univariate(&parts)
}

/// The candidate set never has more than `n − 1` entries.
pub fn finite_size(seed: u64, datasets: usize) -> Result<SuiteReport> {
    let mut r = rng::stream(seed);
    let (mut bad, mut largest) = (0, (0usize, 0usize));
    for t in 0..datasets {
        let n = r.random_range(2..=5000);
        let k = r.random_range(1..=3);
        let m = random_mixture(&mut r, k, 50.0, (1e-4, 100.0))?;
        let mut data = sample(&m, n, derive_seed(seed, &[t as u64]))?.values().to_vec();
        if r.random_bool(0.3) {
            // heavy duplication
            for v in data.iter_mut().skip(1).step_by(2) {
                *v = (*v * 4.0).round() / 4.0;
            }
        }
        let eps = r.random_range(0.1..=1.0);
        let delta = 10f64.powf(r.random_range(-6.0..-0.02));
        let ds = Dataset::univariate(data)?;
        let c = univariate::noisy_candidates(&ds, &PrivacyBudget::new(eps, delta)?, &mut r)?;
        if c.len() > n - 1 {
            bad += 1;
        }
        if c.len() > largest.0 {
            largest = (c.len(), n);
        }
    }
    Ok(SuiteReport::new(
        "candidate-set-size",
        datasets,
        bad,
        0,
        format!("largest candidate set {} at n = {}", largest.0, largest.1),
    ))
}

/// The planted mixture of the crude recovery check.
pub fn recovery_mixture() -> Mixture {
    Mixture::univariate(&[(0.5, 0.0, 1.0), (0.3, 200.0, 25.0), (0.2, -500.0, 0.01)]).expect("valid mixture")
}

/// In how many of `seeds` runs does every component of `truth` get a
/// candidate with `2^a ∈ [σ/(10⁵n⁴), 2σ]` and `μ̂ ∈ [μ − σ − n⁵2^a, μ + σ]`.
pub fn crude_recovery(truth: &Mixture, seed: u64, seeds: usize, n: usize, budget: PrivacyBudget, allowed: usize) -> Result<SuiteReport> {
    let outcomes = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let data = sample(truth, n, derive_seed(seed, &[s as u64, 0]))?;
            let mut r = rng::stream(derive_seed(seed, &[s as u64, 1]));
            let c = univariate::noisy_candidates(&data, &budget, &mut r)?;
            let mut covered = 0;
            for comp in truth.components() {
                let (mu, sigma) = (comp.params.mean()[0], comp.params.std_dev());
                let mut any = false;
                for cand in c.iter() {
                    any |= univariate::candidate_covers(cand, mu, sigma, n)?;
                }
                covered += any as usize;
            }
            Ok((covered == truth.len(), c.len()))
        })
        .collect::<Result<Vec<_>>>()?;
    let misses = outcomes.iter().filter(|o| !o.0).count();
    let sizes: Vec<usize> = outcomes.iter().map(|o| o.1).collect();
    Ok(SuiteReport::new(
        "crude-recovery",
        seeds,
        misses,
        allowed,
        format!("n = {n}; candidate counts {sizes:?}"),
    ))
}

/// Every component with weight `≥ α/k` gets at least `α·n/(8k)` sorted-gap
/// indices with `Y_j ∈ [μ ± σ]` and `σ/(10⁴n⁴) ≤ gap ≤ 2σ`.
pub fn recovery_indices(truth: &Mixture, alpha: f64, seed: u64, seeds: usize, n: usize, allowed: usize) -> Result<SuiteReport> {
    let k = truth.len() as f64;
    let need = alpha * n as f64 / (8.0 * k);
    let misses = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let data = sample(truth, n, derive_seed(seed, &[s as u64]))?;
            let mut ok = true;
            for comp in truth.components().iter().filter(|c| c.weight >= alpha / k) {
                let cnt = univariate::recovery_count(&data, comp.params.mean()[0], comp.params.std_dev())?;
                ok &= cnt as f64 >= need;
            }
            Ok(!ok as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(SuiteReport::new("recovery-indices", seeds, misses, allowed, format!("n = {n}, need {need:.0} indices")))
}

/// No 20 consecutive sorted points of 200 standard normal draws fit in a
/// window of width `2/L`, `L = 100n²`, and all `|x| ≤ L`.
pub fn gap_regularity(seed: u64, seeds: usize) -> Result<SuiteReport> {
    let n = 200;
    let l = 100.0 * (n * n) as f64;
    let std = Mixture::univariate(&[(1.0, 0.0, 1.0)])?;
    let mut bad = 0;
    for s in 0..seeds {
        let data = sample(&std, n, derive_seed(seed, &[s as u64]))?;
        if !univariate::gap_regularity_holds(&data, 20, l)? {
            bad += 1;
        }
    }
    Ok(SuiteReport::new("gap-regularity", seeds, bad, 0, format!("n = {n}, L = {l}")))
}

/// Every random in-ball Gaussian is within `ζ` TV of the cover of the ball
/// around `N(0, 1)` with radius `g`.
pub fn net_covering(seed: u64, points: usize, g: f64, zeta: f64) -> Result<SuiteReport> {
    let ball = CrudeBall::new(GaussianParams::univariate(0.0, 1.0)?, g)?;
    let net = nets::gaussian_cover(&ball, zeta, 1)?;
    let mut r = rng::stream(seed);
    let targets: Vec<GaussianParams> = (0..points)
        .map(|_| {
            let mu = r.random_range(-g..=g);
            let var = r.random_range(-(g.ln())..=g.ln()).exp();
            GaussianParams::univariate(mu, var)
        })
        .collect::<Result<_>>()?;
    let worst = targets
        .par_iter()
        .map(|t| {
            let mut near: Vec<(f64, &GaussianParams)> =
                net.iter().map(|p| Ok((tv_upper_bound(t, p)?, p))).collect::<Result<_>>()?;
            near.sort_by(|a, b| a.0.total_cmp(&b.0));
            let tm = Mixture::single(t.clone());
            near.iter()
                .take(5)
                .map(|(_, p)| Ok(tv_univariate(&tm, &Mixture::single((*p).clone()), 1e-7)?.value))
                .try_fold(f64::INFINITY, |acc: f64, v: Result<f64>| Ok(acc.min(v?)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let bad = worst.iter().filter(|&&v| v > zeta).count();
    let max = worst.iter().copied().fold(0.0, f64::max);
    Ok(SuiteReport::new(
        "net-covering",
        points,
        bad,
        0,
        format!("net size {}, worst min-TV {max:.4} (zeta {zeta})", net.len()),
    ))
}

/// The exponential-mechanism MDE picks a hypothesis within `4·OPT + 0.1` of
/// the truth when the truth is planted among `m` random mixtures.
pub fn selection_rate(seed: u64, seeds: usize, m: usize, n: usize, epsilon: f64, allowed: usize) -> Result<SuiteReport> {
    let mut tvs = Vec::with_capacity(seeds);
    let mut bad = 0;
    for s in 0..seeds {
        let mut r = rng::stream(derive_seed(seed, &[s as u64, 0]));
        let hyps: Vec<Mixture> = (0..m).map(|_| random_mixture(&mut r, 2, 30.0, (0.5, 2.0))).collect::<Result<_>>()?;
        let planted = r.random_range(0..m);
        let truth = hyps[planted].clone();
        let class = HypothesisClass::from_mixtures(hyps, 0.1)?;
        let data = sample(&truth, n, derive_seed(seed, &[s as u64, 1]))?;
        let spec = IntegrationSpec { seed: derive_seed(seed, &[s as u64, 2]), ..IntegrationSpec::default() };
        let (chosen, _) = private_select(&class, &data, epsilon, &spec, &mut r)?;
        let tv = tv_univariate(&truth, &chosen, 1e-6)?.value;
        // the truth is in the class, so OPT = 0
        if tv > 0.1 {
            bad += 1;
        }
        tvs.push(tv);
    }
    let max = tvs.iter().copied().fold(0.0, f64::max);
    Ok(SuiteReport::new(
        "selection-rate",
        seeds,
        bad,
        allowed,
        format!("M = {m}, n = {n}, eps = {epsilon}; max TV {max:.4}"),
    ))
}

/// `ν^{-d} ≤ det(I + νM)/det(I + M) ≤ ν^d` for random `‖M‖_op ≤ 0.1`.
pub fn det_ratio(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut r = rng::stream(seed);
    let mut bad = 0;
    for _ in 0..trials {
        let d = r.random_range(1..=8);
        let m = geometry::random_symmetric(d, 0.1, &mut r);
        let nu = r.random_range(1.0..=2.0);
        if !geometry::det_ratio_bounds(&m, nu)?.holds() {
            bad += 1;
        }
    }
    Ok(SuiteReport::new("det-ratio", trials, bad, 0, "d <= 8".into()))
}

/// `‖JᵀMJ‖_F² ≤ (1 + 3φ)‖M‖_F²` for `J` with singular values in `[0.9, 1.1]`.
pub fn jmj(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut r = rng::stream(seed);
    let (mut bad, mut worst) = (0, 0.0f64);
    for _ in 0..trials {
        let d = r.random_range(1..=6);
        let m = geometry::random_symmetric(d, 10.0, &mut r);
        let j = geometry::random_with_singular_values(d, 0.9, 1.1, &mut r);
        let t = geometry::jmj_terms(&m, &j)?;
        if t.rhs > 0.0 {
            worst = worst.max(t.lhs / t.rhs);
        }
        if !t.holds() {
            bad += 1;
        }
    }
    Ok(SuiteReport::new("jmj", trials, bad, 0, format!("d <= 6; max lhs/rhs {worst:.4}")))
}

fn random_approx_params<R: Rng + ?Sized>(d: usize, r: &mut R) -> Result<ApproxParams> {
    let gamma = r.random_range(0.001..=0.1);
    let rho = gamma * r.random_range(0.3..=(d as f64).sqrt());
    let tau = r.random_range(0.001..=1.0);
    ApproxParams::new(gamma, rho, tau)
}

/// Approximate symmetry (constants ×2) and transitivity (×4) of `≈_{γ,ρ,τ}`
/// for `γ ≤ 0.1`, `d ≤ 5`, on tuples built to satisfy the premise.
pub fn approx_metric(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut r = rng::stream(seed);
    let (mut sym_bad, mut trans_bad) = (0, 0);
    for _ in 0..trials {
        let d = r.random_range(1..=5);
        let p = random_approx_params(d, &mut r)?;
        let p3 = geometry::random_gaussian(d, &mut r);
        let p2 = geometry::random_approx(&p3, &p, &mut r)?;
        let p1 = geometry::random_approx(&p2, &p, &mut r)?;
        if !geometry::approx_check(&p3, &p2, &p.scaled(2.0))? {
            sym_bad += 1;
        }
        if !geometry::approx_check(&p1, &p3, &p.scaled(4.0))? {
            trans_bad += 1;
        }
    }
    Ok(SuiteReport::new(
        "approx-symmetry-transitivity",
        2 * trials,
        sym_bad + trans_bad,
        0,
        format!("symmetry violations {sym_bad}, transitivity violations {trans_bad}"),
    ))
}

/// The three distances of `≈` are unchanged by a common affine push.
pub fn approx_push_invariance(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut r = rng::stream(seed);
    let (mut bad, mut worst) = (0, 0.0f64);
    for _ in 0..trials {
        let d = r.random_range(1..=4);
        let base = geometry::random_gaussian(d, &mut r);
        let hat = geometry::random_gaussian(d, &mut r);
        let mu = DVector::from_fn(d, |_, _| r.random_range(-5.0..5.0));
        let sigma = geometry::random_spd(d, 0.2, 5.0, &mut r);
        let a = geometry::approx_distances(&hat, &base)?;
        let b = geometry::approx_distances(&geometry::affine_push(&hat, &mu, &sigma)?, &geometry::affine_push(&base, &mu, &sigma)?)?;
        let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(1.0);
        let err = rel(a.spectral, b.spectral).max(rel(a.frobenius, b.frobenius)).max(rel(a.mahalanobis, b.mahalanobis));
        worst = worst.max(err);
        if err > 1e-9 {
            bad += 1;
        }
    }
    Ok(SuiteReport::new("approx-push-invariance", trials, bad, 0, format!("max relative change {worst:.2e}")))
}

/// `≈_{γ,τ}` agrees with `≈_{γ,√d·γ,τ}`.
pub fn approx_shorthand(seed: u64, trials: usize) -> Result<SuiteReport> {
    let mut r = rng::stream(seed);
    let mut bad = 0;
    for _ in 0..trials {
        let d = r.random_range(1..=5);
        let base = geometry::random_gaussian(d, &mut r);
        let wide = ApproxParams::new(0.3, 0.3 * (d as f64).sqrt(), 1.0)?;
        let hat = geometry::random_approx(&base, &wide.scaled(1.5), &mut r)?;
        let (g, t) = (r.random_range(0.05..0.5), r.random_range(0.05..1.5));
        let a = geometry::approx_check(&hat, &base, &ApproxParams::shorthand(g, t, d)?)?;
        let b = geometry::approx_check(&hat, &base, &ApproxParams::new(g, (d as f64).sqrt() * g, t)?)?;
        if a != b {
            bad += 1;
        }
    }
    Ok(SuiteReport::new("approx-shorthand", trials, bad, 0, String::new()))
}

/// nvol of the box `μ ∈ [0, 1]`, `Σ ∈ [1, 2]` against `2 − √2`.
pub fn nvol_closed_form(seed: u64, samples: usize) -> Result<SuiteReport> {
    let b = ParamBox::new(1, vec![0.0, 1.0], vec![1.0, 2.0])?;
    let est = geometry::nvol_mc(&ParamRegion::full(b), samples, seed)?;
    let exact = 2.0 - 2f64.sqrt();
    let ok = (est.value - exact).abs() <= 3.0 * est.stderr;
    Ok(SuiteReport::new(
        "nvol-closed-form",
        1,
        !ok as usize,
        0,
        format!("estimate {:.5} +- {:.5}, exact {exact:.5}", est.value, est.stderr),
    ))
}

/// nvol of an approx-ball around `(0, I)` equals nvol of its image under a
/// random affine push, within three combined standard errors.
pub fn nvol_invariance(seed: u64, d: usize, gamma: f64, samples: usize) -> Result<SuiteReport> {
    let mut r = rng::stream(seed);
    let base = GaussianParams::standard(d)?;
    let p = ApproxParams::shorthand(gamma, gamma, d)?;
    let region = ParamRegion::approx_ball(base, p, gamma)?;
    let mu = DVector::from_fn(d, |_, _| r.random_range(-3.0..3.0));
    let sigma = geometry::random_spd(d, 0.5, 2.0, &mut r);
    let inv_root = linalg::spd_inv_sqrt(&sigma)?;
    let image_box = region.bbox.push(&mu, &sigma)?;
    let image = ParamRegion::new(image_box, |q: &GaussianParams| {
        // q ∈ h(S) iff h⁻¹(q) ∈ S
        let mean = &inv_root * (q.mean() - &mu);
        let cov = linalg::symmetrize(&(&inv_root * q.cov() * &inv_root));
        match GaussianParams::new(mean, cov) {
            Ok(pre) => (region.contains)(&pre),
            Err(_) => false,
        }
    });
    let a = geometry::nvol_mc(&region, samples, derive_seed(seed, &[1]))?;
    let b = geometry::nvol_mc(&image, samples, derive_seed(seed, &[2]))?;
    let combined = (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
    let ok = (a.value - b.value).abs() <= 3.0 * combined;
    Ok(SuiteReport::new(
        &format!("nvol-invariance-d{d}"),
        1,
        !ok as usize,
        0,
        format!("S: {:.5} +- {:.5}, h(S): {:.5} +- {:.5}", a.value, a.stderr, b.value, b.stderr),
    ))
}

/// Monte Carlo and quadrature TV agree within the sum of their error bounds
/// on random univariate mixture pairs.
pub fn oracle_equivalence(seed: u64, pairs: usize, mc_samples: usize) -> Result<SuiteReport> {
    let mut r = rng::stream(seed);
    let cases: Vec<(Mixture, Mixture)> = (0..pairs)
        .map(|_| {
            let (k1, k2) = (r.random_range(1..=3), r.random_range(1..=3));
            Ok((random_mixture(&mut r, k1, 5.0, (0.2, 4.0))?, random_mixture(&mut r, k2, 5.0, (0.2, 4.0))?))
        })
        .collect::<Result<_>>()?;
    let gaps = cases
        .par_iter()
        .enumerate()
        .map(|(i, (a, b))| {
            let q = tv_univariate(a, b, 1e-6)?;
            let mc = tv_monte_carlo(a, b, mc_samples, derive_seed(seed, &[i as u64]))?;
            Ok(((q.value - mc.value).abs(), q.error_bound + mc.error_bound))
        })
        .collect::<Result<Vec<_>>>()?;
    let bad = gaps.iter().filter(|(g, b)| g > b).count();
    let worst = gaps.iter().map(|(g, b)| g / b).fold(0.0, f64::max);
    Ok(SuiteReport::new(
        "tv-oracle-equivalence",
        pairs,
        bad,
        0,
        format!("N = {mc_samples}; largest |gap|/bound {worst:.3}"),
    ))
}

/// The suites run by `check-lemmas`: sensitivity, truncated Laplace, candidate
/// set size, gap regularity and the geometry checks.
pub fn standard_suites(seed: u64) -> Result<Vec<SuiteReport>> {
    let s = |tag: u64| derive_seed(seed, &[tag]);
    Ok(vec![
        sensitivity(s(1), 10_000, 50)?,
        tlap_support(s(2), 20, 1_000_000)?,
        tlap_bound_grid(50)?,
        tlap_dp(s(3), 20, 20_000)?,
        finite_size(s(4), 100)?,
        gap_regularity(s(5), 100)?,
        det_ratio(s(6), 1000)?,
        jmj(s(7), 1000)?,
        approx_metric(s(8), 1000)?,
        approx_push_invariance(s(9), 1000)?,
        approx_shorthand(s(10), 1000)?,
        nvol_closed_form(s(11), 200_000)?,
        nvol_invariance(s(12), 1, 0.3, 200_000)?,
        nvol_invariance(s(13), 2, 0.3, 200_000)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiset_enumeration_counts() {
        assert_eq!(all_multisets(2, 4).len(), 15);
        assert_eq!(all_multisets(6, 4).len(), 210);
    }

    #[test]
    fn small_suites_pass() {
        assert!(sensitivity(1, 200, 20).unwrap().passed());
        assert!(det_ratio(1, 100).unwrap().passed());
        assert!(jmj(1, 100).unwrap().passed());
        assert!(approx_metric(1, 100).unwrap().passed());
    }

    #[test]
    fn report_line_format() {
        let r = SuiteReport::new("x", 3, 1, 0, "d".into());
        assert!(r.line().starts_with("FAIL x: 1 violations in 3 trials"));
    }
}
