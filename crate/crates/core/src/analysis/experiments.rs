//! Optimizer comparison grid and the detection race.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objectives::{Benchmark, StartPoint};
use crate::optimizers::{
    final_log_loss, run_method, run_pflug_detection, run_split_detection, Detection, Method,
    SplitSgdConfig,
};
use crate::rng::RngStream;

use super::streams;

/// Default initial-rate grid of the comparison. Chosen to span the range
/// from too-slow to divergent on the default linear problem.
pub const DEFAULT_ETA_GRID: [f64; 5] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareRow {
    pub method: Method,
    pub eta: f64,
    pub seed: u64,
    /// Natural log of the final training loss; `+∞` for diverged runs.
    pub final_log_loss: f64,
}

/// One run per `(method, η, seed)`. All methods of a seed share the start
/// point and the optimizer stream. Rows are ordered by method (as given),
/// then η (as given), then seed.
#[allow(clippy::too_many_arguments)]
pub fn compare_grid(
    bench: &Benchmark<f64>,
    methods: &[Method],
    etas: &[f64],
    seeds: u64,
    budget_epochs: u64,
    template: &SplitSgdConfig<f64>,
    start: StartPoint,
    stream: &RngStream,
) -> Result<Vec<CompareRow>> {
    let cells: Vec<(Method, f64, u64)> = methods
        .iter()
        .flat_map(|&m| {
            etas.iter()
                .flat_map(move |&eta| (0..seeds).map(move |s| (m, eta, s)))
        })
        .collect();
    let runs = stream.fork(streams::RUNS);
    cells
        .into_par_iter()
        .map(|(method, eta, seed)| {
            let run = runs.fork(seed);
            let theta0 = bench.start(start, &run.fork(streams::INIT));
            let trace = run_method(
                &bench.problem,
                method,
                eta,
                template,
                &theta0,
                &run.fork(streams::OPTIMIZER),
                budget_epochs,
            );
            Ok(CompareRow {
                method,
                eta,
                seed,
                final_log_loss: final_log_loss(trace)?,
            })
        })
        .collect()
}

/// Mean final log-loss of `method` at `eta` across seeds; `+∞` if any
/// seed diverged, `None` if there is no such cell.
pub fn mean_final_log_loss(rows: &[CompareRow], method: Method, eta: f64) -> Option<f64> {
    let cell: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method && r.eta == eta)
        .map(|r| r.final_log_loss)
        .collect();
    if cell.is_empty() {
        None
    } else {
        Some(cell.iter().sum::<f64>() / cell.len() as f64)
    }
}

/// Named learning rates of the detection race.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EtaScale {
    Large,
    Small,
}

impl EtaScale {
    pub fn eta(&self) -> f64 {
        match self {
            EtaScale::Large => 1e-2,
            EtaScale::Small => 1e-3,
        }
    }
}

impl fmt::Display for EtaScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EtaScale::Large => "large",
            EtaScale::Small => "small",
        })
    }
}

impl FromStr for EtaScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "large" => Ok(EtaScale::Large),
            "small" => Ok(EtaScale::Small),
            other => Err(Error::invalid(format!("unknown eta scale '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RaceMethod {
    Split,
    Pflug,
}

impl fmt::Display for RaceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RaceMethod::Split => "split",
            RaceMethod::Pflug => "pflug",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RaceOutcome {
    Finished(Detection),
    /// Diverged at this epoch.
    Diverged {
        epoch: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RaceRow {
    pub rep: u64,
    pub method: RaceMethod,
    pub outcome: RaceOutcome,
}

impl RaceRow {
    pub fn is_capped(&self) -> bool {
        matches!(
            self.outcome,
            RaceOutcome::Finished(Detection::Capped { .. })
        )
    }

    /// Detection epoch, cap for budget exhaustion, `+∞` for divergence.
    pub fn epoch_value(&self) -> f64 {
        match self.outcome {
            RaceOutcome::Finished(d) => d.epoch_or_cap() as f64,
            RaceOutcome::Diverged { .. } => f64::INFINITY,
        }
    }
}

/// Both detectors from the same perturbed start and optimizer stream, `reps`
/// times. Rows are ordered by replication, split before pflug.
pub fn detection_race(
    bench: &Benchmark<f64>,
    cfg: &SplitSgdConfig<f64>,
    start: StartPoint,
    reps: u64,
    max_epochs: u64,
    stream: &RngStream,
) -> Result<Vec<RaceRow>> {
    let runs = stream.fork(streams::RUNS);
    let n = bench.problem.dataset().n() as u64;
    let rows: Vec<Result<[RaceRow; 2]>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let run = runs.fork(rep);
            let theta0 = bench.start(start, &run.fork(streams::INIT));
            let opt = run.fork(streams::OPTIMIZER);
            let wrap = |method, r: Result<Detection>| -> Result<RaceRow> {
                let outcome = match r {
                    Ok(d) => RaceOutcome::Finished(d),
                    Err(Error::Divergence { step, .. }) => {
                        RaceOutcome::Diverged { epoch: step / n }
                    }
                    Err(e) => return Err(e),
                };
                Ok(RaceRow {
                    rep,
                    method,
                    outcome,
                })
            };
            let split = wrap(
                RaceMethod::Split,
                run_split_detection(&bench.problem, cfg, &theta0, &opt, max_epochs),
            )?;
            let pflug = wrap(
                RaceMethod::Pflug,
                run_pflug_detection(&bench.problem, cfg.eta, &theta0, &opt, max_epochs),
            )?;
            Ok([split, pflug])
        })
        .collect();
    let mut out = Vec::with_capacity(2 * reps as usize);
    for pair in rows {
        out.extend(pair?);
    }
    Ok(out)
}
