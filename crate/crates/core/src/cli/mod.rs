//! Command-line front end: experiment subcommands writing CSV plus a
//! `key=value` metadata sidecar.
//!
//! Every setting resolves as flag, then `--config` file entry, then built-in
//! default. The resolved values are written to `<out>.meta`.

mod settings;

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    coherence_histogram, compare_grid, default_benchmark, detection_race, experiment_stream,
    sensitivity_grid, type1_error_probability, CoherenceStudy, EtaScale, QRiskQuery,
    DEFAULT_ETA_GRID,
};
use crate::error::{Error, Result};
use crate::objectives::{
    default_theta_star, generate, make_default_spec, Benchmark, Family, StartPoint,
};
use crate::optimizers::{Method, SplitSgdConfig};

pub use settings::{List, Settings};

/// Version of the CSV layouts, bumped whenever columns change.
pub const SCHEMA_VERSION: u32 = 1;
/// Worker count used when `--threads` is absent.
pub const THREADS_ENV: &str = "SPLITSGD_THREADS";

pub const COMPARE_HEADER: &str = "method,eta,seed,final_log_loss";
pub const RACE_HEADER: &str = "rep,method,detection_epoch_or_cap,capped";
pub const MC_HEADER: &str = "replication,q_value,normalized";
pub const SENSITIVITY_HEADER: &str = "w,q,eta,seed,final_log_loss";

#[derive(Parser, Debug)]
#[command(
    name = "splitsgd",
    version,
    about = "SplitSGD experiments on synthetic convex problems"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Experiment seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; CSV goes to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// `key=value` file with defaults for any long flag of the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (falls back to $SPLITSGD_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Final log-loss of each method over an η grid and seeds.
    Compare(CompareArgs),
    /// Detection epochs of the splitting and pflug diagnostics.
    Race(RaceArgs),
    /// Monte-Carlo histogram of one gradient coherence.
    Mc(McArgs),
    /// Type-I error probability of the decision rule.
    Qrisk(QriskArgs),
    /// `(w, q)` sensitivity grid of SplitSGD.
    Sensitivity(SensitivityArgs),
    /// Writes a synthetic dataset.
    GenData(GenDataArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Compare(_) => "compare",
            Command::Race(_) => "race",
            Command::Mc(_) => "mc",
            Command::Qrisk(_) => "qrisk",
            Command::Sensitivity(_) => "sensitivity",
            Command::GenData(_) => "gen-data",
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct ProblemArgs {
    /// linear or logistic.
    #[arg(long)]
    pub problem: Option<Family>,
    /// Number of data points.
    #[arg(long)]
    pub n: Option<usize>,
    /// Dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Noise standard deviation of linear targets.
    #[arg(long)]
    pub noise_sd: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SplitArgs {
    /// Length of the first thread, in epochs.
    #[arg(long)]
    pub t1_epochs: Option<u64>,
    /// Windows per diagnostic.
    #[arg(long)]
    pub w: Option<usize>,
    /// Steps per window.
    #[arg(long)]
    pub l: Option<usize>,
    /// Tolerance of the decision rule.
    #[arg(long)]
    pub q: Option<f64>,
    /// Learning-rate decay factor.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CompareArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Comma-separated initial learning rates.
    #[arg(long)]
    pub etas: Option<List<f64>>,
    #[arg(long)]
    pub epochs: Option<u64>,
    /// Number of seeds per cell.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Comma-separated subset of splitsgd,const,sqrt,half.
    #[arg(long)]
    pub methods: Option<List<Method>>,
    /// near-opt or reversed.
    #[arg(long)]
    pub start: Option<StartPoint>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RaceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub start: Option<StartPoint>,
    /// large or small.
    #[arg(long)]
    pub eta_scale: Option<EtaScale>,
    /// Explicit learning rate; overrides --eta-scale.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub reps: Option<u64>,
    #[arg(long)]
    pub max_epochs: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    SmallEta,
    LongBurnIn,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::SmallEta => "small-eta",
            Regime::LongBurnIn => "long-burn-in",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small-eta" => Ok(Regime::SmallEta),
            "long-burn-in" => Ok(Regime::LongBurnIn),
            other => Err(Error::invalid(format!("unknown regime '{other}'"))),
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct McArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// small-eta or long-burn-in.
    #[arg(long)]
    pub regime: Option<Regime>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub burn_in_epochs: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Which coherence to record, counted from 1.
    #[arg(long)]
    pub window_index: Option<usize>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub start: Option<StartPoint>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct QriskArgs {
    #[arg(long)]
    pub w: Option<usize>,
    #[arg(long)]
    pub q: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Comma-separated window counts; each must divide n.
    #[arg(long)]
    pub ws: Option<List<usize>>,
    #[arg(long)]
    pub qs: Option<List<f64>>,
    #[arg(long)]
    pub etas: Option<List<f64>>,
    #[arg(long)]
    pub t1_epochs: Option<u64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub start: Option<StartPoint>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
}

/// Exit status for a library error: 2 for invalid input, 3 for numeric
/// failures, 1 for I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Invalid(_) => 2,
        Error::DimensionMismatch { .. } | Error::NonFinite { .. } | Error::Divergence { .. } => 3,
        Error::Io(_) => 1,
    }
}

/// Parses `args` and runs the command; returns the process exit status.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let threads = match cli.common.threads {
        Some(t) => Some(t),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| {
                Error::invalid(format!(
                    "{THREADS_ENV} must be a positive integer, got '{v}'"
                ))
            })?),
            Err(_) => None,
        },
    };
    if threads == Some(0) {
        return Err(Error::invalid("--threads must be positive"));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::invalid(e.to_string()))?;
    pool.install(|| execute(cli))
}

fn execute(cli: &Cli) -> Result<()> {
    let mut settings = match &cli.common.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let seed = settings.get("seed", cli.common.seed, 0u64)?;
    let output = match &cli.command {
        Command::Compare(a) => compare(a, seed, &mut settings)?,
        Command::Race(a) => race(a, seed, &mut settings)?,
        Command::Mc(a) => mc(a, seed, &mut settings)?,
        Command::Qrisk(a) => qrisk(a, &mut settings)?,
        Command::Sensitivity(a) => sensitivity(a, seed, &mut settings)?,
        Command::GenData(a) => gen_data(a, seed, &mut settings)?,
    };
    settings.finish()?;
    match &cli.common.out {
        Some(path) => {
            write_file(path, output.as_bytes())?;
            write_file(
                &meta_path(path),
                settings.metadata(cli.command.name()).as_bytes(),
            )
        }
        None => {
            io::stdout().write_all(output.as_bytes())?;
            Ok(())
        }
    }
}

/// Sidecar path: the output path with `.meta` appended.
pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

fn benchmark(p: &ProblemArgs, seed: u64, s: &mut Settings) -> Result<Benchmark<f64>> {
    let family = s.get("problem", p.problem, Family::Linear)?;
    let n = s.get("n", p.n, 1000usize)?;
    let d = s.get("d", p.d, 20usize)?;
    let noise_sd = s.get("noise-sd", p.noise_sd, 1.0f64)?;
    let mut bench = default_benchmark(family, seed)?;
    if (n, d, noise_sd) != (bench.spec.n, bench.spec.d, bench.spec.noise_sd) {
        let mut spec = bench.spec.clone();
        spec.n = n;
        spec.d = d;
        spec.noise_sd = noise_sd;
        spec.theta_star = default_theta_star(d);
        bench = Benchmark::new(spec)?;
    }
    Ok(bench)
}

fn split_config(
    a: &SplitArgs,
    eta: f64,
    n: usize,
    s: &mut Settings,
) -> Result<SplitSgdConfig<f64>> {
    let mut cfg = SplitSgdConfig::convex_defaults(eta, n);
    let t1_epochs = s.get("t1-epochs", a.t1_epochs, 4u64)?;
    cfg.t1 = t1_epochs
        .checked_mul(n as u64)
        .ok_or_else(|| Error::invalid("t1-epochs is too large"))?;
    cfg.windows = s.get("w", a.w, cfg.windows)?;
    cfg.window_len = s.get("l", a.l, cfg.window_len)?;
    cfg.q = s.get("q", a.q, cfg.q)?;
    cfg.gamma = s.get("gamma", a.gamma, cfg.gamma)?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive<T: PartialOrd + Default + fmt::Display>(name: &str, v: T) -> Result<T> {
    if v > T::default() {
        Ok(v)
    } else {
        Err(Error::invalid(format!(
            "--{name} must be positive, got {v}"
        )))
    }
}

fn compare(a: &CompareArgs, seed: u64, s: &mut Settings) -> Result<String> {
    let bench = benchmark(&a.problem, seed, s)?;
    let template = split_config(&a.split, 0.0, bench.spec.n, s)?;
    let etas = s
        .get("etas", a.etas.clone(), List(DEFAULT_ETA_GRID.to_vec()))?
        .0;
    let epochs = positive("epochs", s.get("epochs", a.epochs, 100u64)?)?;
    let seeds = positive("seeds", s.get("seeds", a.seeds, 20u64)?)?;
    let methods = s
        .get("methods", a.methods.clone(), List(Method::ALL.to_vec()))?
        .0;
    let start = s.get("start", a.start, StartPoint::Reversed)?;
    if etas.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::invalid("--etas must be finite and non-negative"));
    }
    let rows = compare_grid(
        &bench,
        &methods,
        &etas,
        seeds,
        epochs,
        &template,
        start,
        &experiment_stream(seed),
    )?;
    s.record(
        "diverged",
        rows.iter()
            .filter(|r| r.final_log_loss.is_infinite())
            .count(),
    );
    let mut out = format!("{COMPARE_HEADER}\n");
    for r in &rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.method, r.eta, r.seed, r.final_log_loss
        ));
    }
    Ok(out)
}

fn race(a: &RaceArgs, seed: u64, s: &mut Settings) -> Result<String> {
    let bench = benchmark(&a.problem, seed, s)?;
    let start = s.get("start", a.start, StartPoint::Reversed)?;
    let scale = s.get("eta-scale", a.eta_scale, EtaScale::Large)?;
    let eta = positive("eta", s.get("eta", a.eta, scale.eta())?)?;
    let reps = positive("reps", s.get("reps", a.reps, 100u64)?)?;
    let max_epochs = positive("max-epochs", s.get("max-epochs", a.max_epochs, 1000u64)?)?;
    let cfg = split_config(&a.split, eta, bench.spec.n, s)?;
    let rows = detection_race(
        &bench,
        &cfg,
        start,
        reps,
        max_epochs,
        &experiment_stream(seed),
    )?;
    s.record(
        "diverged",
        rows.iter()
            .filter(|r| r.epoch_value().is_infinite())
            .count(),
    );
    s.record("capped", rows.iter().filter(|r| r.is_capped()).count());
    let mut out = format!("{RACE_HEADER}\n");
    for r in &rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.rep,
            r.method,
            r.epoch_value(),
            r.is_capped()
        ));
    }
    Ok(out)
}

fn mc(a: &McArgs, seed: u64, s: &mut Settings) -> Result<String> {
    let bench = benchmark(&a.problem, seed, s)?;
    let n = bench.spec.n as u64;
    let regime = s.get("regime", a.regime, Regime::SmallEta)?;
    let base = match regime {
        Regime::SmallEta => CoherenceStudy::small_eta(),
        Regime::LongBurnIn => CoherenceStudy::long_burn_in(bench.spec.n),
    };
    let eta = s.get("eta", a.eta, base.eta)?;
    let burn_in_epochs = s.get("burn-in-epochs", a.burn_in_epochs, base.burn_in_steps / n)?;
    let study = CoherenceStudy {
        eta,
        burn_in_steps: burn_in_epochs
            .checked_mul(n)
            .ok_or_else(|| Error::invalid("burn-in-epochs is too large"))?,
        replications: s.get("reps", a.reps, base.replications)?,
        window_index: s.get("window-index", a.window_index, base.window_index)?,
        window_len: s.get("l", a.l, base.window_len)?,
        start: s.get("start", a.start, base.start)?,
        ..base
    };
    let hist = coherence_histogram(&bench, &study, &experiment_stream(seed))?;
    s.record("diverged", hist.diverged.len());
    s.record("negative-fraction", hist.summary.negative_fraction);
    let mut out = format!("{MC_HEADER}\n");
    for x in &hist.samples {
        out.push_str(&format!("{},{},{}\n", x.replication, x.raw, x.normalized));
    }
    Ok(out)
}

fn qrisk(a: &QriskArgs, s: &mut Settings) -> Result<String> {
    let w = s.get("w", a.w, 20usize)?;
    let q = s.get("q", a.q, 0.4f64)?;
    let p = type1_error_probability(QRiskQuery { w, q })?;
    Ok(format!("{p}\n"))
}

fn sensitivity(a: &SensitivityArgs, seed: u64, s: &mut Settings) -> Result<String> {
    let bench = benchmark(&a.problem, seed, s)?;
    let n = bench.spec.n;
    let ws = s.get("ws", a.ws.clone(), List(vec![10usize, 20, 40]))?.0;
    let qs = s.get("qs", a.qs.clone(), List(vec![0.35f64, 0.4, 0.45]))?.0;
    let etas = s
        .get("etas", a.etas.clone(), List(DEFAULT_ETA_GRID.to_vec()))?
        .0;
    let t1_epochs = s.get("t1-epochs", a.t1_epochs, 4u64)?;
    let gamma = s.get("gamma", a.gamma, 0.5f64)?;
    let epochs = positive("epochs", s.get("epochs", a.epochs, 100u64)?)?;
    let seeds = positive("seeds", s.get("seeds", a.seeds, 20u64)?)?;
    let start = s.get("start", a.start, StartPoint::Reversed)?;
    let mut base = SplitSgdConfig::convex_defaults(0.0, n);
    base.t1 = t1_epochs
        .checked_mul(n as u64)
        .ok_or_else(|| Error::invalid("t1-epochs is too large"))?;
    base.gamma = gamma;
    let grid = sensitivity_grid(
        &bench,
        &base,
        &ws,
        &qs,
        &etas,
        seeds,
        epochs,
        start,
        &experiment_stream(seed),
    )?;
    s.record(
        "diverged",
        grid.runs
            .iter()
            .filter(|r| r.final_log_loss.is_infinite())
            .count(),
    );
    let mut out = format!("{SENSITIVITY_HEADER}\n");
    for r in &grid.runs {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.w, r.q, r.eta, r.seed, r.final_log_loss
        ));
    }
    Ok(out)
}

fn gen_data(a: &GenDataArgs, seed: u64, s: &mut Settings) -> Result<String> {
    let family = s.get("problem", a.problem.problem, Family::Linear)?;
    let mut spec = make_default_spec::<f64>(family);
    spec.n = s.get("n", a.problem.n, spec.n)?;
    spec.d = s.get("d", a.problem.d, spec.d)?;
    spec.noise_sd = s.get("noise-sd", a.problem.noise_sd, spec.noise_sd)?;
    spec.theta_star = default_theta_star(spec.d);
    spec.data_seed = experiment_stream(seed).fork(crate::analysis::streams::DATA);
    let data = generate(&spec)?;
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}
