use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use privgmm::lemmas::{self, SuiteReport};
use privgmm::model::sample;
use privgmm::pipeline::{self, bottom_json, Outcome, RunConfig, SweepGrid};
use privgmm::{Dataset, Error, GaussianParams, Mixture, PrivacyBudget};

const EXIT_BOTTOM: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "privgmm", version, about = "Differentially private Gaussian mixture learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a univariate mixture: private candidates, nets, private selection.
    Learn1d(Learn1d),
    /// Nets and private selection around supplied crude centers (d ≤ 3).
    Fine(Fine),
    /// Run the univariate learner over a grid of n, ε, α and write CSV rows.
    Sweep(Sweep),
    /// Run the property suites and print one line per suite.
    CheckLemmas(CheckLemmas),
}

#[derive(Args, Clone)]
struct Common {
    /// Number of mixture components.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Crude-stage sample size (derived from K when omitted).
    #[arg(long)]
    n: Option<usize>,
    /// Selection-stage sample size (derived from K when omitted).
    #[arg(long = "n-prime")]
    n_prime: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    /// Target accuracy in total variation.
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    /// Net and weight-grid resolution (α/k when omitted).
    #[arg(long)]
    zeta: Option<f64>,
    /// Maximum number of hypotheses kept for selection.
    #[arg(long, default_value_t = pipeline::DEFAULT_CAP)]
    cap: usize,
    /// Crude ball radius (n³ when omitted).
    #[arg(long = "G")]
    g: Option<f64>,
    /// Sample-size multiplier.
    #[arg(long = "K", default_value_t = pipeline::DEFAULT_K)]
    k_mult: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep a seeded subset of at most this many candidates.
    #[arg(long = "max-candidates")]
    max_candidates: Option<usize>,
    /// Monte Carlo draws for integrals in d ≥ 2.
    #[arg(long = "mc-samples", default_value_t = privgmm::select::DEFAULT_MC_SAMPLES)]
    mc_samples: usize,
}

impl Common {
    fn config(&self, d: usize) -> RunConfig {
        RunConfig {
            d,
            k: self.k,
            n: self.n,
            n_prime: self.n_prime,
            epsilon: self.eps,
            delta: self.delta,
            alpha: self.alpha,
            zeta: self.zeta,
            g: self.g,
            cap: self.cap,
            k_mult: self.k_mult,
            seed: self.seed,
            max_candidates: self.max_candidates,
            mc_samples: self.mc_samples,
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct Io {
    /// Input CSV, one row per point. Without it, data is drawn from --truth.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Ground-truth mixture JSON, used for TV reporting and data generation.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Where to write the estimate JSON, or {"result": "bottom"}.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the full run report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct Learn1d {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    io: Io,
    /// Run on T disjoint blocks and return a majority-agreeing estimate.
    #[arg(long)]
    amplify: Option<usize>,
}

#[derive(Args)]
struct Fine {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    io: Io,
    /// JSON list of crude centers, each {"mean": [...], "cov": [[...]]}.
    #[arg(long, conflicts_with = "moments")]
    crude: Option<PathBuf>,
    /// Derive crude centers from clustered sample moments. NOT PRIVATE.
    #[arg(long)]
    moments: bool,
}

#[derive(Args)]
struct Sweep {
    #[command(flatten)]
    common: Common,
    /// Mixture JSON the samples are drawn from.
    #[arg(long)]
    truth: PathBuf,
    /// Crude-stage sizes; n' follows n unless --n-prime is given.
    #[arg(long, value_delimiter = ',', required = true)]
    ns: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    epsilons: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.2")]
    alphas: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// CSV output (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckLemmas {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also run the slower recovery, covering, selection and oracle suites.
    #[arg(long)]
    full: bool,
    /// Write the reports as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(serde_json::from_reader(io::BufReader::new(f)).map_err(Error::from)?)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    writeln!(w)?;
    Ok(())
}

fn load_truth(io: &Io) -> anyhow::Result<Option<Mixture>> {
    io.truth.as_deref().map(read_json).transpose()
}

fn load_data(io: &Io, truth: Option<&Mixture>, rows: usize, seed: u64) -> anyhow::Result<Dataset> {
    match (&io.input, truth) {
        (Some(p), _) => Ok(Dataset::from_csv_path(p)?),
        (None, Some(t)) => Ok(sample(t, rows, privgmm::rng::derive_seed(seed, &[0xda7a]))?),
        (None, None) => Err(Error::Config("either --in or --truth is required".into()).into()),
    }
}

fn finish(outcome: &Outcome, io: &Io) -> anyhow::Result<ExitCode> {
    let result = outcome.result_json();
    match &io.out {
        Some(p) => write_json(p, &result)?,
        None => println!("{}", serde_json::to_string_pretty(&result)?),
    }
    if let Some(p) = &io.report {
        write_json(p, outcome)?;
    }
    let rep = outcome.report();
    let mut summary = format!("class size {}{}", rep.class_size, if rep.truncated { " (truncated)" } else { "" });
    if let Some(c) = &rep.candidates {
        summary.push_str(&format!(", {} candidates", c.len()));
    }
    if let Some(tv) = rep.tv {
        summary.push_str(&format!(", TV to truth {tv:.4}"));
    }
    if let Some(best) = rep.best_in_class_tv {
        summary.push_str(&format!(", best in class {best:.4}"));
    }
    eprintln!("{summary}");
    if rep.class_misses_truth == Some(true) {
        eprintln!("warning: no hypothesis in the class is within alpha of the truth");
    }
    Ok(if outcome.is_bottom() { ExitCode::from(EXIT_BOTTOM) } else { ExitCode::SUCCESS })
}

fn learn1d(args: &Learn1d) -> anyhow::Result<ExitCode> {
    let config = args.common.config(1);
    config.validate()?;
    let truth = load_truth(&args.io)?;
    let block = config.crude_n() + config.fine_n();
    let t = args.amplify.unwrap_or(1);
    let data = load_data(&args.io, truth.as_ref(), t * block, config.seed)?;
    match args.amplify {
        None => finish(&pipeline::learn_univariate(&config, &data, truth.as_ref())?, &args.io),
        Some(t) => {
            let (mixture, report) = pipeline::amplify(&config, &data, t, truth.as_ref())?;
            let result = match &mixture {
                Some(m) => serde_json::to_value(m)?,
                None => bottom_json(),
            };
            match &args.io.out {
                Some(p) => write_json(p, &result)?,
                None => println!("{}", serde_json::to_string_pretty(&result)?),
            }
            if let Some(p) = &args.io.report {
                write_json(p, &report)?;
            }
            eprintln!("agreement {:?}, chosen run {:?}", report.agreement, report.chosen);
            Ok(if mixture.is_none() { ExitCode::from(EXIT_BOTTOM) } else { ExitCode::SUCCESS })
        }
    }
}

fn fine(args: &Fine) -> anyhow::Result<ExitCode> {
    let truth = load_truth(&args.io)?;
    let d = match (&args.io.input, &truth) {
        (None, Some(t)) => t.dim(),
        _ => 1,
    };
    let rows = args.common.n.ok_or_else(|| Error::Config("--n is required when sampling from --truth".into()));
    let data = match &args.io.input {
        Some(_) => load_data(&args.io, None, 0, args.common.seed)?,
        None => load_data(&args.io, truth.as_ref(), rows?, args.common.seed)?,
    };
    let config = args.common.config(data.dim().max(d));
    config.validate()?;
    let crude: Vec<GaussianParams> = match (&args.crude, args.moments) {
        (Some(p), _) => read_json(p)?,
        (None, true) => {
            eprintln!("warning: --moments centers are computed from the data without privacy");
            pipeline::empirical_moments_nonprivate(&data, config.k, privgmm::rng::derive_seed(config.seed, &[0xc0]))?
        }
        (None, false) => return Err(Error::Config("fine needs --crude or --moments".into()).into()),
    };
    finish(&pipeline::fine_stage(&config, &crude, &data, truth.as_ref())?, &args.io)
}

fn sweep(args: &Sweep) -> anyhow::Result<ExitCode> {
    let truth: Mixture = read_json(&args.truth)?;
    let base = args.common.config(truth.dim());
    let grid = SweepGrid {
        ns: args.ns.clone(),
        epsilons: args.epsilons.clone(),
        alphas: args.alphas.clone(),
        trials: args.trials,
    };
    let rows = pipeline::sweep(&base, &truth, &grid)?;
    match &args.out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            pipeline::write_sweep_csv(&rows, BufWriter::new(f))?;
        }
        None => pipeline::write_sweep_csv(&rows, io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn check_lemmas(args: &CheckLemmas) -> anyhow::Result<ExitCode> {
    let s = |tag: u64| privgmm::rng::derive_seed(args.seed, &[tag]);
    let mut reports = lemmas::standard_suites(s(0))?;
    if args.full {
        let budget = PrivacyBudget::new(1.0, 1e-6)?;
        reports.push(lemmas::crude_recovery(&lemmas::recovery_mixture(), s(1), 20, 30_000, budget, 2)?);
        reports.push(lemmas::recovery_indices(&lemmas::recovery_mixture(), 0.15, s(2), 20, 30_000, 2)?);
        reports.push(lemmas::net_covering(s(3), 500, 4.0, 0.1)?);
        reports.push(lemmas::selection_rate(s(4), 20, 50, 5000, 1.0, 2)?);
        reports.push(lemmas::oracle_equivalence(s(5), 100, 20_000)?);
    }
    for r in &reports {
        println!("{}", r.line());
    }
    if let Some(p) = &args.out {
        write_json(p, &reports)?;
    }
    Ok(if reports.iter().all(SuiteReport::passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn exit_code(err: &anyhow::Error) -> ExitCode {
    match err.downcast_ref::<Error>() {
        Some(Error::Io(_)) | None => ExitCode::FAILURE,
        Some(_) => ExitCode::from(EXIT_CONFIG),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                // clap's own usage exit code would collide with ⊥
                _ => ExitCode::from(EXIT_CONFIG),
            };
        }
    };
    let result = match &cli.command {
        Command::Learn1d(a) => learn1d(a),
        Command::Fine(a) => fine(a),
        Command::Sweep(a) => sweep(a),
        Command::CheckLemmas(a) => check_lemmas(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        exit_code(&e)
    })
}
