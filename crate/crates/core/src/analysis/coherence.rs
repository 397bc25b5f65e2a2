//! Sampling distribution of a single gradient coherence.

use rayon::prelude::*;

use crate::diagnostic::{cosine, DiagnosticConfig, SplitThreads};
use crate::error::{Error, Result};
use crate::kernel::OptimizerKernel;
use crate::objectives::{Benchmark, StartPoint};
use crate::oracle::{GradientOracle, GradientSample};
use crate::rng::RngStream;
use crate::vector::ParamVector;

use super::streams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoherenceOracle {
    Stochastic,
    /// Exact full gradients; every coherence is a squared norm.
    Noiseless,
}

/// One histogram experiment: per replication, perturb the start, run
/// `burn_in_steps` constant-rate SGD steps, then split and record coherence
/// number `window_index` (1-based).
#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceStudy {
    pub eta: f64,
    pub burn_in_steps: u64,
    pub windows: usize,
    pub window_len: usize,
    pub window_index: usize,
    pub replications: usize,
    /// Summaries use the cosine form when set.
    pub normalized: bool,
    pub start: StartPoint,
    pub oracle: CoherenceOracle,
}

impl CoherenceStudy {
    /// Small rate, no burn-in: the transient regime where coherences are
    /// almost surely positive.
    pub fn small_eta() -> Self {
        Self {
            eta: 1e-4,
            burn_in_steps: 0,
            windows: 20,
            window_len: 50,
            window_index: 2,
            replications: 500,
            normalized: true,
            start: StartPoint::Reversed,
            oracle: CoherenceOracle::Stochastic,
        }
    }

    /// Larger rate after a long burn-in: the stationary regime where
    /// coherence signs are close to fair coins.
    pub fn long_burn_in(epoch_len: usize) -> Self {
        Self {
            eta: 1e-2,
            burn_in_steps: 200 * epoch_len as u64,
            ..Self::small_eta()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_index == 0 || self.window_index > self.windows {
            return Err(Error::invalid(format!(
                "window index {} outside 1..={}",
                self.window_index, self.windows
            )));
        }
        if self.replications == 0 {
            return Err(Error::invalid("at least one replication is required"));
        }
        self.diagnostic_config().validate()
    }

    fn diagnostic_config(&self) -> DiagnosticConfig<f64> {
        DiagnosticConfig {
            eta: self.eta,
            windows: self.windows,
            window_len: self.window_len,
            q: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherenceSample {
    pub replication: usize,
    pub raw: f64,
    pub normalized: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoherenceSummary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator).
    pub sd: f64,
    /// Fraction of strictly negative values.
    pub negative_fraction: f64,
}

impl CoherenceSummary {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self {
                count,
                mean: f64::NAN,
                sd: f64::NAN,
                negative_fraction: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        let negative_fraction = values.iter().filter(|&&v| v < 0.0).count() as f64 / count as f64;
        Self {
            count,
            mean,
            sd,
            negative_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceHistogram {
    /// Non-diverged replications in replication order.
    pub samples: Vec<CoherenceSample>,
    /// Replications whose burn-in or diagnostic diverged.
    pub diverged: Vec<usize>,
    pub summary: CoherenceSummary,
}

impl CoherenceHistogram {
    pub fn values(&self, normalized: bool) -> Vec<f64> {
        self.samples
            .iter()
            .map(|s| if normalized { s.normalized } else { s.raw })
            .collect()
    }
}

pub fn coherence_histogram(
    bench: &Benchmark<f64>,
    study: &CoherenceStudy,
    stream: &RngStream,
) -> Result<CoherenceHistogram> {
    study.validate()?;
    let reps = stream.fork(streams::REPLICATIONS);
    let outcomes: Vec<Result<Option<CoherenceSample>>> = (0..study.replications)
        .into_par_iter()
        .map(|r| {
            let rep = reps.fork(r as u64);
            let outcome = match study.oracle {
                CoherenceOracle::Stochastic => replicate(&bench.problem, bench, study, &rep),
                CoherenceOracle::Noiseless => {
                    replicate(&bench.problem.noiseless(), bench, study, &rep)
                }
            };
            match outcome {
                Ok((raw, normalized)) => Ok(Some(CoherenceSample {
                    replication: r,
                    raw,
                    normalized,
                })),
                Err(e) if e.is_divergence() => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut samples = Vec::with_capacity(study.replications);
    let mut diverged = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            Some(s) => samples.push(s),
            None => diverged.push(r),
        }
    }
    let chosen: Vec<f64> = samples
        .iter()
        .map(|s| {
            if study.normalized {
                s.normalized
            } else {
                s.raw
            }
        })
        .collect();
    Ok(CoherenceHistogram {
        summary: CoherenceSummary::of(&chosen),
        samples,
        diverged,
    })
}

fn replicate<O: GradientOracle<f64>>(
    oracle: &O,
    bench: &Benchmark<f64>,
    study: &CoherenceStudy,
    rep: &RngStream,
) -> Result<(f64, f64)> {
    let mut theta: ParamVector<f64> = bench.start(study.start, &rep.fork(streams::INIT));
    let mut kernel = OptimizerKernel::plain(oracle.dim());
    let mut rng = rep.fork(streams::BURN_IN).rng();
    let mut sample = GradientSample::zeros(oracle.dim());
    for t in 1..=study.burn_in_steps {
        oracle
            .draw(&theta, &mut rng, &mut sample)
            .and_then(|_| kernel.step(&mut theta, &sample.gradient, study.eta, t))
            .map_err(|_| Error::Divergence { thread: 0, step: t })?;
    }
    // windows after the recorded one cannot influence it, so they are skipped
    let cfg = DiagnosticConfig {
        windows: study.window_index,
        ..study.diagnostic_config()
    };
    let res = SplitThreads::new(oracle, &theta, cfg, &kernel, &rep.fork(streams::DIAGNOSTIC))?
        .finish()?;
    let i = study.window_index - 1;
    let (a, b) = res.window_norms[i];
    Ok((res.coherences[i], cosine(res.coherences[i], a, b)))
}
