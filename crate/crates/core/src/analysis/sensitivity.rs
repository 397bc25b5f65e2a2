//! `(w, q)` sensitivity of SplitSGD with a one-epoch diagnostic budget.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objectives::{Benchmark, StartPoint};
use crate::optimizers::{final_log_loss, run_splitsgd, SplitSgdConfig};
use crate::rng::RngStream;

use super::streams;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensitivityRun {
    pub w: usize,
    pub q: f64,
    pub eta: f64,
    pub seed: u64,
    pub final_log_loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensitivityCell {
    pub w: usize,
    /// Window length chosen so that `w·l = n`.
    pub l: usize,
    pub q: f64,
    pub eta: f64,
    /// Mean over seeds; `+∞` if any seed diverged.
    pub mean_final_log_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityGrid {
    /// Ordered by `w`, `q`, `η` (as given), then seed.
    pub runs: Vec<SensitivityRun>,
    /// One per `(w, q, η)`, same order.
    pub cells: Vec<SensitivityCell>,
}

#[allow(clippy::too_many_arguments)]
pub fn sensitivity_grid(
    bench: &Benchmark<f64>,
    base: &SplitSgdConfig<f64>,
    w_values: &[usize],
    q_values: &[f64],
    eta_values: &[f64],
    seeds: u64,
    budget_epochs: u64,
    start: StartPoint,
    stream: &RngStream,
) -> Result<SensitivityGrid> {
    if seeds == 0 {
        return Err(Error::invalid("at least one seed is required"));
    }
    let n = bench.problem.dataset().n();
    for &w in w_values {
        if w == 0 || !n.is_multiple_of(w) {
            return Err(Error::invalid(format!("w = {w} does not divide n = {n}")));
        }
    }
    let keys: Vec<(usize, f64, f64, u64)> = w_values
        .iter()
        .flat_map(|&w| {
            q_values.iter().flat_map(move |&q| {
                eta_values
                    .iter()
                    .flat_map(move |&eta| (0..seeds).map(move |s| (w, q, eta, s)))
            })
        })
        .collect();
    let runs_stream = stream.fork(streams::RUNS);
    let runs: Vec<SensitivityRun> = keys
        .into_par_iter()
        .map(|(w, q, eta, seed)| {
            let run = runs_stream.fork(seed);
            let cfg = SplitSgdConfig {
                eta,
                windows: w,
                window_len: n / w,
                q,
                ..*base
            };
            let theta0 = bench.start(start, &run.fork(streams::INIT));
            let trace = run_splitsgd(
                &bench.problem,
                &cfg,
                &theta0,
                &run.fork(streams::OPTIMIZER),
                budget_epochs,
            );
            Ok(SensitivityRun {
                w,
                q,
                eta,
                seed,
                final_log_loss: final_log_loss(trace)?,
            })
        })
        .collect::<Result<_>>()?;
    let cells = runs
        .chunks(seeds as usize)
        .map(|chunk| {
            let first = chunk[0];
            SensitivityCell {
                w: first.w,
                l: n / first.w,
                q: first.q,
                eta: first.eta,
                mean_final_log_loss: chunk.iter().map(|r| r.final_log_loss).sum::<f64>()
                    / chunk.len() as f64,
            }
        })
        .collect();
    Ok(SensitivityGrid { runs, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_default_spec, Family};

    #[test]
    fn grid_shape_and_window_lengths() {
        let bench = Benchmark::new(make_default_spec(Family::Linear)).unwrap();
        let base = SplitSgdConfig::convex_defaults(1e-2, 1000);
        let grid = sensitivity_grid(
            &bench,
            &base,
            &[20, 40],
            &[0.35, 0.45],
            &[1e-3],
            2,
            6,
            StartPoint::Reversed,
            &RngStream::new(0, 0),
        )
        .unwrap();
        assert_eq!(grid.runs.len(), 8);
        assert_eq!(grid.cells.len(), 4);
        assert_eq!(grid.cells[0].l, 50);
        assert_eq!(grid.cells[2].l, 25);
        assert!(grid.runs.iter().all(|r| r.final_log_loss.is_finite()));
    }

    #[test]
    fn non_dividing_window_count_is_rejected() {
        let bench = Benchmark::new(make_default_spec(Family::Linear)).unwrap();
        let base = SplitSgdConfig::convex_defaults(1e-2, 1000);
        let err = sensitivity_grid(
            &bench,
            &base,
            &[30],
            &[0.4],
            &[1e-3],
            1,
            1,
            StartPoint::Reversed,
            &RngStream::new(0, 0),
        );
        assert!(err.is_err());
    }
}
