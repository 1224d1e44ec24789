//! End-to-end learners: the univariate two-stage learner, the fine stage on
//! its own, the optional amplification wrapper and parameter sweeps.

use std::time::Instant;

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mech::BudgetLedger;
use crate::model::{sample, Dataset, GaussianParams, Mixture, PrivacyBudget};
use crate::nets::{self, CrudeBall, HypothesisClass};
use crate::rng;
use crate::select::{private_select, IntegrationSpec, SelectionReport, DEFAULT_MC_SAMPLES};
use crate::tvdist::{tv_distance, tv_univariate};
use crate::univariate::{noisy_candidates, CandidateSet};

/// Default sample-size multiplier.
pub const DEFAULT_K: f64 = 150.0;

/// Default hypothesis cap.
pub const DEFAULT_CAP: usize = 200;

/// Monte Carlo samples for TV reports in `d ≥ 2`.
const REPORT_TV_SAMPLES: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub d: usize,
    pub k: usize,
    /// Crude-stage sample size; derived from `k_mult` when unset.
    pub n: Option<usize>,
    /// Selection-stage sample size; derived from `k_mult` when unset.
    pub n_prime: Option<usize>,
    pub epsilon: f64,
    pub delta: f64,
    pub alpha: f64,
    /// Weight and cover resolution; `α/k` when unset.
    pub zeta: Option<f64>,
    /// Crude ball radius; `n³` when unset for the univariate learner.
    pub g: Option<f64>,
    pub cap: usize,
    pub k_mult: f64,
    pub seed: u64,
    pub max_candidates: Option<usize>,
    pub mc_samples: usize,
    pub d_max: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            d: 1,
            k: 1,
            n: None,
            n_prime: None,
            epsilon: 1.0,
            delta: 1e-6,
            alpha: 0.2,
            zeta: None,
            g: None,
            cap: DEFAULT_CAP,
            k_mult: DEFAULT_K,
            seed: 0,
            max_candidates: None,
            mc_samples: DEFAULT_MC_SAMPLES,
            d_max: nets::DEFAULT_D_MAX,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if let Some(z) = self.zeta {
            if !(z > 0.0 && z < 1.0) {
                return bad(format!("zeta must lie in (0, 1), got {z}"));
            }
        }
        if let Some(g) = self.g {
            if !(g >= 1.0 && g.is_finite()) {
                return bad(format!("G must be at least 1, got {g}"));
            }
        }
        if self.n.is_some_and(|n| n < 2) {
            return bad("n must be at least 2".into());
        }
        if self.n_prime == Some(0) {
            return bad("n' must be at least 1".into());
        }
        if self.cap == 0 {
            return bad("cap must be at least 1".into());
        }
        if !(self.k_mult > 0.0) {
            return bad("K must be positive".into());
        }
        Ok(())
    }

    /// `⌈K·k·ln(1/δ)/(α·ε)⌉` unless set.
    pub fn crude_n(&self) -> usize {
        self.n.unwrap_or_else(|| {
            let k = self.k as f64;
            (self.k_mult * k * (1.0 / self.delta).ln() / (self.alpha * self.epsilon)).ceil() as usize
        })
        .max(2)
    }

    /// `⌈K·(k/α² + k/(α·ε))⌉` unless set.
    pub fn fine_n(&self) -> usize {
        self.n_prime.unwrap_or_else(|| {
            let k = self.k as f64;
            let a = self.alpha;
            (self.k_mult * (k / (a * a) + k / (a * self.epsilon))).ceil() as usize
        })
        .max(1)
    }

    pub fn zeta(&self) -> f64 {
        self.zeta.unwrap_or(self.alpha / self.k as f64)
    }

    /// `G`, defaulting to `n³` for crude sample size `n`.
    pub fn ball_radius(&self, n: usize) -> f64 {
        self.g.unwrap_or_else(|| (n as f64).powi(3))
    }

    pub fn budget(&self) -> Result<PrivacyBudget> {
        PrivacyBudget::new(self.epsilon, self.delta)
    }

    fn integration(&self, seed: u64) -> IntegrationSpec {
        IntegrationSpec { mc_samples: self.mc_samples, seed, ..IntegrationSpec::default() }
    }
}

/// Half-open row range `[start, end)` of the input read by one stage.
pub type RowRange = (usize, usize);

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub candidates: Option<CandidateSet>,
    pub crude_rows: Option<RowRange>,
    pub fine_rows: RowRange,
    pub g: f64,
    pub zeta: f64,
    pub class_size: usize,
    pub truncated: bool,
    pub selection: Option<SelectionReport>,
    pub ledger: BudgetLedger,
    /// TV between the output and the supplied truth.
    pub tv: Option<f64>,
    /// Smallest TV between the truth and any hypothesis in the class.
    pub best_in_class_tv: Option<f64>,
    /// Set when even the best hypothesis is more than `α` from the truth.
    pub class_misses_truth: Option<bool>,
}

impl RunReport {
    fn new(fine_rows: RowRange, g: f64, zeta: f64) -> Self {
        RunReport {
            candidates: None,
            crude_rows: None,
            fine_rows,
            g,
            zeta,
            class_size: 0,
            truncated: false,
            selection: None,
            ledger: BudgetLedger::default(),
            tv: None,
            best_in_class_tv: None,
            class_misses_truth: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Outcome {
    Estimate { mixture: Mixture, report: RunReport },
    Bottom { report: RunReport },
}

impl Outcome {
    pub fn report(&self) -> &RunReport {
        match self {
            Outcome::Estimate { report, .. } | Outcome::Bottom { report } => report,
        }
    }

    pub fn mixture(&self) -> Option<&Mixture> {
        match self {
            Outcome::Estimate { mixture, .. } => Some(mixture),
            Outcome::Bottom { .. } => None,
        }
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, Outcome::Bottom { .. })
    }

    /// The output document: the mixture, or `{"result": "bottom"}`.
    pub fn result_json(&self) -> serde_json::Value {
        match self {
            Outcome::Estimate { mixture, .. } => serde_json::to_value(mixture).expect("mixture serialises"),
            Outcome::Bottom { .. } => bottom_json(),
        }
    }
}

pub fn bottom_json() -> serde_json::Value {
    serde_json::json!({ "result": "bottom" })
}

fn tv_to_truth(truth: &Mixture, m: &Mixture, seed: u64) -> Result<f64> {
    Ok(tv_distance(truth, m, REPORT_TV_SAMPLES, seed)?.value)
}

fn select_from_balls(
    config: &RunConfig,
    balls: &[CrudeBall],
    fine: &Dataset,
    truth: Option<&Mixture>,
    mut report: RunReport,
) -> Result<Outcome> {
    let d = balls[0].dim();
    let covers = balls
        .iter()
        .map(|b| nets::cover(b, report.zeta, d, config.d_max))
        .collect::<Result<Vec<_>>>()?;
    let class = nets::mixture_hypotheses(&covers, config.k, report.zeta, config.cap, rng::derive_seed(config.seed, &[2]))?;
    report.class_size = class.len();
    report.truncated = class.truncated;
    report.zeta = class.zeta;
    let spec = config.integration(rng::derive_seed(config.seed, &[3]));
    let mut r = rng::stream(rng::derive_seed(config.seed, &[4]));
    let (mixture, selection) = private_select(&class, fine, config.epsilon, &spec, &mut r)?;
    report.ledger.charge("selection", PrivacyBudget::pure(config.epsilon)?);
    report.selection = Some(selection);
    if let Some(t) = truth {
        annotate_truth(config, t, &mixture, &class, &mut report)?;
    }
    Ok(Outcome::Estimate { mixture, report })
}

fn annotate_truth(
    config: &RunConfig,
    truth: &Mixture,
    chosen: &Mixture,
    class: &HypothesisClass,
    report: &mut RunReport,
) -> Result<()> {
    if truth.dim() != chosen.dim() {
        return Err(Error::DimensionMismatch { expected: chosen.dim(), got: truth.dim() });
    }
    let seed = rng::derive_seed(config.seed, &[5]);
    report.tv = Some(tv_to_truth(truth, chosen, seed)?);
    let best = class
        .hypotheses
        .par_iter()
        .map(|h| tv_to_truth(truth, h, seed))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    report.best_in_class_tv = Some(best);
    report.class_misses_truth = Some(best > config.alpha);
    Ok(())
}

/// The univariate learner. Rows `[0, n)` feed the `(ε, δ)`-DP candidate
/// stage and rows `[n, n + n')` the `ε`-DP selection stage; no row is read by
/// both. Returns ⊥ when no candidate survives.
pub fn learn_univariate(config: &RunConfig, data: &Dataset, truth: Option<&Mixture>) -> Result<Outcome> {
    config.validate()?;
    if config.d != 1 || data.dim() != 1 {
        return Err(Error::UnsupportedDimension { d: data.dim().max(config.d), max: 1 });
    }
    let (n, n_prime) = (config.crude_n(), config.fine_n());
    if data.n() < n + n_prime {
        return Err(invalid(format!(
            "need {} samples ({n} crude + {n_prime} fine), got {}",
            n + n_prime,
            data.n()
        )));
    }
    let crude = data.slice(0, n)?;
    let fine = data.slice(n, n + n_prime)?;
    let g = config.ball_radius(n);
    let mut report = RunReport::new((n, n + n_prime), g, config.zeta());
    report.crude_rows = Some((0, n));

    let mut r = rng::stream(rng::derive_seed(config.seed, &[1]));
    let mut candidates = noisy_candidates(&crude, &config.budget()?, &mut r)?;
    report.ledger.charge("candidates", config.budget()?);
    if let Some(max) = config.max_candidates {
        if candidates.len() > max {
            // post-processing: a seeded subset of the released set
            let mut keep: Vec<_> = candidates.candidates.choose_multiple(&mut r, max).copied().collect();
            keep.sort_by_key(|c| (c.a, c.b));
            candidates.candidates = keep;
        }
    }
    report.candidates = Some(candidates.clone());
    if candidates.is_empty() {
        return Ok(Outcome::Bottom { report });
    }
    let balls = candidates
        .iter()
        .map(|c| CrudeBall::new(c.to_gaussian()?, g))
        .collect::<Result<Vec<_>>>()?;
    select_from_balls(config, &balls, &fine, truth, report)
}

/// Covers around externally supplied crude centers, then private selection on
/// every row of `data`. Returns ⊥ for an empty center list.
pub fn fine_stage(
    config: &RunConfig,
    crude: &[GaussianParams],
    data: &Dataset,
    truth: Option<&Mixture>,
) -> Result<Outcome> {
    config.validate()?;
    if data.n() == 0 {
        return Err(invalid("dataset is empty"));
    }
    let d = data.dim();
    if d > config.d_max {
        return Err(Error::UnsupportedDimension { d, max: config.d_max });
    }
    if let Some(c) = crude.iter().find(|c| c.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: c.dim() });
    }
    let g = config.ball_radius(data.n());
    let report = RunReport::new((0, data.n()), g, config.zeta());
    if crude.is_empty() {
        return Ok(Outcome::Bottom { report });
    }
    let balls = crude
        .iter()
        .map(|c| CrudeBall::new(c.clone(), g))
        .collect::<Result<Vec<_>>>()?;
    select_from_balls(config, &balls, data, truth, report)
}

/// NOT PRIVATE. Crude centers from seeded Lloyd iterations followed by
/// per-cluster sample moments, for demonstrating the fine stage in `d ≥ 2`.
pub fn empirical_moments_nonprivate(data: &Dataset, k: usize, seed: u64) -> Result<Vec<GaussianParams>> {
    let (n, d) = (data.n(), data.dim());
    if k == 0 || n < k {
        return Err(invalid("need at least k rows and k ≥ 1"));
    }
    let row = |i: usize| nalgebra::DVector::from_column_slice(data.row(i));
    let mut r = rng::stream(seed);
    // farthest-point initialisation from a random start
    let mut centers = vec![row(rand::Rng::random_range(&mut r, 0..n))];
    while centers.len() < k {
        let far = (0..n)
            .max_by(|&a, &b| {
                let da = centers.iter().map(|c| (row(a) - c).norm_squared()).fold(f64::INFINITY, f64::min);
                let db = centers.iter().map(|c| (row(b) - c).norm_squared()).fold(f64::INFINITY, f64::min);
                da.total_cmp(&db)
            })
            .expect("nonempty data");
        centers.push(row(far));
    }
    let mut labels = vec![0usize; n];
    for _ in 0..50 {
        for (i, l) in labels.iter_mut().enumerate() {
            let x = row(i);
            *l = (0..k)
                .min_by(|&a, &b| (&x - &centers[a]).norm_squared().total_cmp(&(&x - &centers[b]).norm_squared()))
                .expect("k ≥ 1");
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            if !members.is_empty() {
                *center = members.iter().map(|&i| row(i)).sum::<nalgebra::DVector<f64>>() / members.len() as f64;
            }
        }
    }
    (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            let m = members.len().max(1) as f64;
            let mut cov = nalgebra::DMatrix::identity(d, d) * 1e-6;
            for &i in &members {
                let x = row(i) - &centers[c];
                cov += &x * x.transpose() / m;
            }
            GaussianParams::new(centers[c].clone(), cov)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AmplifyReport {
    pub runs: Vec<Outcome>,
    pub chosen: Option<usize>,
    /// For each run, how many other estimates lie within `2α`.
    pub agreement: Vec<usize>,
}

/// Runs the univariate learner on `t` disjoint blocks of `data` and returns
/// an estimate within `2α` of a majority of the others (the best-supported
/// one if none reaches a majority).
pub fn amplify(config: &RunConfig, data: &Dataset, t: usize, truth: Option<&Mixture>) -> Result<(Option<Mixture>, AmplifyReport)> {
    config.validate()?;
    if t == 0 {
        return Err(Error::Config("amplify needs at least one run".into()));
    }
    let block = config.crude_n() + config.fine_n();
    if data.n() < t * block {
        return Err(invalid(format!("amplify needs {} samples, got {}", t * block, data.n())));
    }
    let runs = (0..t)
        .map(|i| {
            let cfg = RunConfig { seed: rng::derive_seed(config.seed, &[100, i as u64]), ..config.clone() };
            learn_univariate(&cfg, &data.slice(i * block, (i + 1) * block)?, truth)
        })
        .collect::<Result<Vec<_>>>()?;
    let estimates: Vec<Option<&Mixture>> = runs.iter().map(Outcome::mixture).collect();
    let mut agreement = vec![0usize; t];
    for i in 0..t {
        let Some(a) = estimates[i] else { continue };
        for j in 0..t {
            if i == j {
                continue;
            }
            if let Some(b) = estimates[j] {
                if tv_univariate(a, b, 1e-6)?.value <= 2.0 * config.alpha {
                    agreement[i] += 1;
                }
            }
        }
    }
    let valid: Vec<usize> = (0..t).filter(|&i| estimates[i].is_some()).collect();
    let majority = 0.51 * (t.saturating_sub(1)) as f64;
    let chosen = valid
        .iter()
        .copied()
        .find(|&i| agreement[i] as f64 >= majority)
        .or_else(|| valid.iter().copied().max_by_key(|&i| (agreement[i], std::cmp::Reverse(i))));
    let mixture = chosen.and_then(|i| estimates[i].cloned());
    Ok((mixture, AmplifyReport { runs, chosen, agreement }))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepGrid {
    pub ns: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub alphas: Vec<f64>,
    pub trials: usize,
}

/// One CSV row of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d: usize,
    pub k: usize,
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
    pub seed: u64,
    pub trial: usize,
    pub tv: Option<f64>,
    pub wall_ms: u64,
    pub class_size: usize,
    pub bottom: bool,
}

pub const SWEEP_HEADER: &str = "d,k,n,eps,delta,alpha,seed,trial,tv,wall_ms,class_size,bottom";

/// Runs the univariate learner on fresh samples from `truth` for every cell
/// and trial. Each cell sets `n` and, unless the base config fixes it, `n' = n`.
/// Rows come back in grid order; everything but `wall_ms` is a function of the
/// seed.
pub fn sweep(base: &RunConfig, truth: &Mixture, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    if grid.ns.is_empty() || grid.epsilons.is_empty() || grid.alphas.is_empty() || grid.trials == 0 {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let mut jobs = Vec::new();
    for &n in &grid.ns {
        for &eps in &grid.epsilons {
            for &alpha in &grid.alphas {
                for trial in 0..grid.trials {
                    jobs.push((n, eps, alpha, trial));
                }
            }
        }
    }
    jobs.par_iter()
        .enumerate()
        .map(|(idx, &(n, eps, alpha, trial))| {
            let seed = rng::derive_seed(base.seed, &[idx as u64]);
            let cfg = RunConfig {
                n: Some(n),
                n_prime: Some(base.n_prime.unwrap_or(n)),
                epsilon: eps,
                alpha,
                seed,
                ..base.clone()
            };
            cfg.validate()?;
            let start = Instant::now();
            let data = sample(truth, cfg.crude_n() + cfg.fine_n(), rng::derive_seed(seed, &[0]))?;
            let out = learn_univariate(&cfg, &data, Some(truth))?;
            let report = out.report();
            Ok(SweepRow {
                d: cfg.d,
                k: cfg.k,
                n,
                eps,
                delta: cfg.delta,
                alpha,
                seed,
                trial,
                tv: report.tv,
                wall_ms: start.elapsed().as_millis() as u64,
                class_size: report.class_size,
                bottom: out.is_bottom(),
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(SWEEP_HEADER.split(','))?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(r: R) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != SWEEP_HEADER {
        return Err(invalid(format!("unexpected sweep header {}", header.join(","))));
    }
    rd.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_sizes() {
        let c = RunConfig { k: 2, alpha: 0.2, epsilon: 1.0, delta: 1e-6, ..RunConfig::default() };
        assert_eq!(c.crude_n(), (150.0 * 2.0 * 1e6f64.ln() / 0.2).ceil() as usize);
        assert_eq!(c.fine_n(), 9000);
        assert!((c.zeta() - 0.1).abs() < 1e-15);
        assert_eq!(c.ball_radius(10), 1000.0);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for c in [
            RunConfig { epsilon: 0.0, ..RunConfig::default() },
            RunConfig { delta: 1.0, ..RunConfig::default() },
            RunConfig { n: Some(1), ..RunConfig::default() },
            RunConfig { g: Some(0.5), ..RunConfig::default() },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn tiny_run_is_bottom_or_legal() {
        let cfg = RunConfig { n: Some(2), n_prime: Some(5), ..RunConfig::default() };
        let data = Dataset::univariate(vec![0.1, 0.4, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let out = learn_univariate(&cfg, &data, None).unwrap();
        assert!(out.is_bottom());
        assert_eq!(out.result_json(), serde_json::json!({"result": "bottom"}));
        assert_eq!(out.report().crude_rows, Some((0, 2)));
        assert_eq!(out.report().fine_rows, (2, 7));
    }

    #[test]
    fn empty_crude_list_is_bottom() {
        let data = Dataset::univariate(vec![0.0, 1.0]).unwrap();
        assert!(fine_stage(&RunConfig::default(), &[], &data, None).unwrap().is_bottom());
    }

    #[test]
    fn sweep_csv_round_trip() {
        let rows = vec![SweepRow {
            d: 1,
            k: 2,
            n: 100,
            eps: 1.0,
            delta: 1e-6,
            alpha: 0.2,
            seed: 7,
            trial: 0,
            tv: None,
            wall_ms: 3,
            class_size: 0,
            bottom: true,
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(SWEEP_HEADER));
        assert_eq!(read_sweep_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn moments_helper_finds_clusters() {
        let truth = Mixture::univariate(&[(0.5, -10.0, 1.0), (0.5, 10.0, 1.0)]).unwrap();
        let data = sample(&truth, 2000, 3).unwrap();
        let mut c = empirical_moments_nonprivate(&data, 2, 1).unwrap();
        c.sort_by(|a, b| a.mean()[0].total_cmp(&b.mean()[0]));
        assert!((c[0].mean()[0] + 10.0).abs() < 0.3 && (c[1].mean()[0] - 10.0).abs() < 0.3);
    }
}
