use std::fmt;
use std::str::FromStr;

use crate::diagnostic::{as_divergence, DiagnosticConfig, SplitThreads};
use crate::error::{Error, Result};
use crate::kernel::{KernelKind, OptimizerKernel};
use crate::oracle::{GradientSample, Objective};
use crate::rng::{RngStream, StreamRng};
use crate::scalar::Scalar;
use crate::vector::{check_dim, ParamVector};

use super::schedule::ScheduleState;
use super::trace::{Event, RunTrace, TraceRecord};

/// Diagnostic `b` (0-based) of a SplitSGD run draws from
/// `stream.fork(DIAGNOSTIC_STREAM_BASE + b)`; the single threads use `stream`
/// itself.
pub const DIAGNOSTIC_STREAM_BASE: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSgdConfig<T> {
    /// Initial learning rate.
    pub eta: T,
    pub windows: usize,
    pub window_len: usize,
    pub q: f64,
    /// Maximum number of diagnostics `B`. After the last one the schedule
    /// keeps running single-thread SGD at its current rate.
    pub max_diagnostics: u64,
    /// Length of the first single thread, in gradient steps.
    pub t1: u64,
    pub gamma: T,
    pub kernel: KernelKind<T>,
}

impl<T: Scalar> SplitSgdConfig<T> {
    /// `w = 20`, `l = 50`, `q = 0.4`, `γ = 0.5`, `t₁ = 4` epochs, unlimited
    /// diagnostics, plain SGD.
    pub fn convex_defaults(eta: T, epoch_len: usize) -> Self {
        Self {
            eta,
            windows: 20,
            window_len: 50,
            q: 0.4,
            max_diagnostics: u64::MAX,
            t1: 4 * epoch_len as u64,
            gamma: T::lit(0.5),
            kernel: KernelKind::Plain,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.diagnostic_config(self.eta).validate()?;
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            return Err(Error::invalid(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.t1 == 0 {
            return Err(Error::invalid("t1 must be at least one step"));
        }
        Ok(())
    }

    pub fn diagnostic_config(&self, eta: T) -> DiagnosticConfig<T> {
        DiagnosticConfig {
            eta,
            windows: self.windows,
            window_len: self.window_len,
            q: self.q,
        }
    }
}

/// Shared bookkeeping: budget in epoch units, oracle-call counting and
/// per-epoch loss logging.
struct Runner<'a, T: Scalar, O: Objective<T> + ?Sized> {
    objective: &'a O,
    epoch_len: u64,
    budget: u64,
    units: u64,
    evals: u64,
    theta: ParamVector<T>,
    kernel: OptimizerKernel<T>,
    sample: GradientSample<T>,
    rng: StreamRng,
    trace: RunTrace,
}

impl<'a, T: Scalar, O: Objective<T> + ?Sized> Runner<'a, T, O> {
    fn new(
        objective: &'a O,
        theta0: &ParamVector<T>,
        kernel: OptimizerKernel<T>,
        stream: &RngStream,
        budget_epochs: u64,
        initial_rate: T,
    ) -> Result<Self> {
        check_dim(objective.dim(), theta0.dim())?;
        if budget_epochs == 0 {
            return Err(Error::invalid("budget must be at least one epoch"));
        }
        let epoch_len = objective.epoch_len() as u64;
        let mut runner = Self {
            objective,
            epoch_len,
            budget: budget_epochs.saturating_mul(epoch_len),
            units: 0,
            evals: 0,
            theta: theta0.clone(),
            kernel,
            sample: GradientSample::zeros(objective.dim()),
            rng: stream.rng(),
            trace: RunTrace::default(),
        };
        let loss = runner.loss_at(&theta0.clone())?;
        runner.trace.push_initial(loss, initial_rate.as_f64());
        Ok(runner)
    }

    fn exhausted(&self) -> bool {
        self.units >= self.budget
    }

    fn at_boundary(&self) -> bool {
        self.units.is_multiple_of(self.epoch_len)
    }

    fn loss_at(&self, theta: &ParamVector<T>) -> Result<f64> {
        let loss = self
            .objective
            .full_loss(theta)
            .map_err(|e| as_divergence(e, 0, self.units))?
            .as_f64();
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(Error::Divergence {
                thread: 0,
                step: self.units,
            })
        }
    }

    /// One single-thread step; returns the gradient used.
    fn step(&mut self, eta: T) -> Result<&ParamVector<T>> {
        self.units += 1;
        self.evals += 1;
        self.trace.thread_steps += 1;
        let step = self.units;
        self.objective
            .draw(&self.theta, &mut self.rng, &mut self.sample)
            .map_err(|e| as_divergence(e, 0, step))?;
        self.kernel
            .step(&mut self.theta, &self.sample.gradient, eta, step)
            .map_err(|e| as_divergence(e, 0, step))?;
        Ok(&self.sample.gradient)
    }

    fn record(&self, theta: &ParamVector<T>, rate: T, event: Event) -> Result<TraceRecord> {
        Ok(TraceRecord {
            epoch: self.units / self.epoch_len,
            gradient_evals: self.evals,
            learning_rate: rate.as_f64(),
            full_loss: self.loss_at(theta)?,
            event,
        })
    }

    fn log_if_boundary(&mut self, rate: T) -> Result<()> {
        if self.at_boundary() {
            let r = self.record(&self.theta, rate, Event::None)?;
            self.trace.push(r);
        }
        Ok(())
    }

    fn mark(&mut self, rate: T, event: Event) -> Result<()> {
        let r = self.record(&self.theta, rate, event)?;
        self.trace.mark(r);
        Ok(())
    }

    /// Runs a diagnostic from the current iterate, charging `w·l` budget
    /// units. Returns `None` if the budget ran out first; the iterate is then
    /// the midpoint of the interrupted threads.
    fn diagnostic(
        &mut self,
        cfg: DiagnosticConfig<T>,
        stream: &RngStream,
        rate: T,
    ) -> Result<Option<bool>> {
        let start_units = self.units;
        let objective = self.objective;
        let mut split = SplitThreads::new(objective, &self.theta, cfg, &self.kernel, stream)?;
        while !split.is_complete() {
            if self.exhausted() {
                self.theta = split.midpoint();
                return Ok(None);
            }
            split.step().map_err(|e| match e {
                Error::Divergence { thread, step } => Error::Divergence {
                    thread,
                    step: start_units + step,
                },
                other => other,
            })?;
            self.units += 1;
            self.evals += 2;
            self.trace.diagnostic_steps += 1;
            if self.at_boundary() && !split.is_complete() {
                let r = self.record(&split.midpoint(), rate, Event::None)?;
                self.trace.push(r);
            }
        }
        let result = split.finish()?;
        self.theta = result.theta_d;
        self.kernel.reset();
        self.trace.diagnostics_run += 1;
        if self.at_boundary() {
            self.log_if_boundary(rate)?;
        }
        Ok(Some(result.stationary))
    }
}

impl RunTrace {
    fn push_initial(&mut self, loss: f64, rate: f64) {
        self.push(TraceRecord {
            epoch: 0,
            gradient_evals: 0,
            learning_rate: rate,
            full_loss: loss,
            event: Event::None,
        });
    }
}

pub(crate) struct SplitOutcome {
    pub trace: RunTrace,
    /// Budget units consumed when the first stationary verdict arrived.
    pub first_detection: Option<u64>,
    pub epoch_len: u64,
}

pub(crate) fn split_sgd_core<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    cfg: &SplitSgdConfig<T>,
    theta0: &ParamVector<T>,
    stream: &RngStream,
    budget_epochs: u64,
    stop_on_detection: bool,
) -> Result<SplitOutcome> {
    cfg.validate()?;
    let kernel = OptimizerKernel::from_kind(objective.dim(), cfg.kernel)?;
    let mut run = Runner::new(objective, theta0, kernel, stream, budget_epochs, cfg.eta)?;
    let mut state = ScheduleState::new(cfg.eta, cfg.t1);
    let mut first_detection = None;
    'outer: loop {
        let len = if run.trace.diagnostics_run < cfg.max_diagnostics {
            state.thread_len
        } else {
            u64::MAX
        };
        let mut done = 0;
        while done < len {
            if run.exhausted() {
                break 'outer;
            }
            run.step(state.eta)?;
            run.log_if_boundary(state.eta)?;
            done += 1;
        }
        if run.exhausted() {
            break;
        }
        let diag_stream = stream.fork(DIAGNOSTIC_STREAM_BASE + run.trace.diagnostics_run);
        match run.diagnostic(cfg.diagnostic_config(state.eta), &diag_stream, state.eta)? {
            None => break,
            Some(true) => {
                state.decay(cfg.gamma);
                run.mark(state.eta, Event::DiagnosticS)?;
                if first_detection.is_none() {
                    first_detection = Some(run.units);
                    if stop_on_detection {
                        break;
                    }
                }
            }
            Some(false) => run.mark(state.eta, Event::DiagnosticN)?,
        }
    }
    Ok(SplitOutcome {
        trace: run.trace,
        first_detection,
        epoch_len: run.epoch_len,
    })
}

/// SplitSGD: constant-rate single threads alternating with splitting
/// diagnostics; each stationary verdict multiplies the rate by `γ` and
/// lengthens the next thread to `⌊t/γ⌋`. Every diagnostic restarts from the
/// midpoint of its threads.
///
/// The budget is `budget_epochs·n` units, where a diagnostic costs `w·l`
/// units (its two threads are treated as parallel).
pub fn run_splitsgd<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    cfg: &SplitSgdConfig<T>,
    theta0: &ParamVector<T>,
    stream: &RngStream,
    budget_epochs: u64,
) -> Result<RunTrace> {
    Ok(split_sgd_core(objective, cfg, theta0, stream, budget_epochs, false)?.trace)
}

/// Plain SGD at a constant rate.
pub fn run_constant_sgd<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    eta: T,
    theta0: &ParamVector<T>,
    stream: &RngStream,
    budget_epochs: u64,
) -> Result<RunTrace> {
    let mut run = Runner::new(
        objective,
        theta0,
        OptimizerKernel::plain(objective.dim()),
        stream,
        budget_epochs,
        eta,
    )?;
    while !run.exhausted() {
        run.step(eta)?;
        run.log_if_boundary(eta)?;
    }
    Ok(run.trace)
}

/// Step size of the `t`-th step (1-based) of the `1/√t` schedule started at `20η`.
pub fn sqrt_decay_rate<T: Scalar>(eta: T, t: u64) -> T {
    T::lit(20.0) * eta / T::lit(t as f64).sqrt()
}

pub fn run_sqrt_decay_sgd<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    eta: T,
    theta0: &ParamVector<T>,
    stream: &RngStream,
    budget_epochs: u64,
) -> Result<RunTrace> {
    let mut run = Runner::new(
        objective,
        theta0,
        OptimizerKernel::plain(objective.dim()),
        stream,
        budget_epochs,
        sqrt_decay_rate(eta, 1),
    )?;
    let mut t = 0;
    while !run.exhausted() {
        t += 1;
        run.step(sqrt_decay_rate(eta, t))?;
        run.log_if_boundary(sqrt_decay_rate(eta, t + 1))?;
    }
    Ok(run.trace)
}

/// SGD^{1/2}: threads of length `t₁, 2t₁, 4t₁, …` at rates `η, η/2, η/4, …`.
pub fn run_sgd_half<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    eta: T,
    t1: u64,
    theta0: &ParamVector<T>,
    stream: &RngStream,
    budget_epochs: u64,
) -> Result<RunTrace> {
    if t1 == 0 {
        return Err(Error::invalid("t1 must be at least one step"));
    }
    let mut run = Runner::new(
        objective,
        theta0,
        OptimizerKernel::plain(objective.dim()),
        stream,
        budget_epochs,
        eta,
    )?;
    let mut state = ScheduleState::new(eta, t1);
    'outer: loop {
        for _ in 0..state.thread_len {
            if run.exhausted() {
                break 'outer;
            }
            run.step(state.eta)?;
            run.log_if_boundary(state.eta)?;
        }
        state.decay(T::lit(0.5));
        if run.exhausted() {
            break;
        }
        run.mark(state.eta, Event::LrHalved)?;
    }
    Ok(run.trace)
}

/// The four schedules of the convex comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    SplitSgd,
    Constant,
    SqrtDecay,
    Half,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::SplitSgd,
        Method::Constant,
        Method::SqrtDecay,
        Method::Half,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::SplitSgd => "splitsgd",
            Method::Constant => "const",
            Method::SqrtDecay => "sqrt",
            Method::Half => "half",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "splitsgd" => Ok(Method::SplitSgd),
            "const" => Ok(Method::Constant),
            "sqrt" => Ok(Method::SqrtDecay),
            "half" => Ok(Method::Half),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

/// Runs `method` at initial rate `eta`; SplitSGD and SGD^{1/2} take their
/// remaining parameters (and `t₁`) from `template`.
pub fn run_method<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    method: Method,
    eta: T,
    template: &SplitSgdConfig<T>,
    theta0: &ParamVector<T>,
    stream: &RngStream,
    budget_epochs: u64,
) -> Result<RunTrace> {
    match method {
        Method::SplitSgd => {
            let cfg = SplitSgdConfig { eta, ..*template };
            run_splitsgd(objective, &cfg, theta0, stream, budget_epochs)
        }
        Method::Constant => run_constant_sgd(objective, eta, theta0, stream, budget_epochs),
        Method::SqrtDecay => run_sqrt_decay_sgd(objective, eta, theta0, stream, budget_epochs),
        Method::Half => run_sgd_half(objective, eta, template.t1, theta0, stream, budget_epochs),
    }
}

/// Final natural-log loss of a run, `+∞` if it diverged.
pub fn final_log_loss(run: Result<RunTrace>) -> Result<f64> {
    match run {
        Ok(trace) => Ok(trace.final_log_loss().unwrap_or(f64::INFINITY)),
        Err(e) if e.is_divergence() => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_default_spec, Benchmark, Family, StartPoint};

    fn bench() -> Benchmark<f64> {
        Benchmark::new(make_default_spec(Family::Linear)).unwrap()
    }

    fn theta0(b: &Benchmark<f64>) -> ParamVector<f64> {
        b.start(StartPoint::Reversed, &RngStream::new(1, 7))
    }

    #[test]
    fn zero_rate_keeps_loss_constant() {
        let b = bench();
        let trace =
            run_constant_sgd(&b.problem, 0.0, &theta0(&b), &RngStream::new(1, 1), 5).unwrap();
        assert_eq!(trace.records.len(), 6);
        let first = trace.records[0].full_loss;
        assert!(trace.records.iter().all(|r| r.full_loss == first));
    }

    #[test]
    fn records_are_per_epoch_and_strictly_increasing() {
        let b = bench();
        let trace =
            run_constant_sgd(&b.problem, 1e-3, &theta0(&b), &RngStream::new(1, 1), 3).unwrap();
        let evals: Vec<u64> = trace.records.iter().map(|r| r.gradient_evals).collect();
        assert_eq!(evals, vec![0, 1000, 2000, 3000]);
        assert_eq!(
            trace.records.iter().map(|r| r.epoch).collect::<Vec<_>>(),
            vec![0, 1, 2, 3]
        );
    }

    #[test]
    fn sqrt_rates() {
        assert_eq!(sqrt_decay_rate(0.01f64, 1), 0.2);
        assert!((sqrt_decay_rate(0.01f64, 400) - 0.01).abs() < 1e-17);
        let rates: Vec<f64> = (1..100).map(|t| sqrt_decay_rate(1e-3, t)).collect();
        assert!(rates.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn half_schedule_lengths_and_rates() {
        let b = bench();
        // t1 = 1 epoch, 7 epochs = 1 + 2 + 4
        let trace = run_sgd_half(
            &b.problem,
            1e-3,
            1000,
            &theta0(&b),
            &RngStream::new(2, 2),
            7,
        )
        .unwrap();
        let halvings: Vec<(u64, f64)> = trace
            .events()
            .map(|r| (r.gradient_evals, r.learning_rate))
            .collect();
        assert_eq!(halvings, vec![(1000, 5e-4), (3000, 2.5e-4)]);
        assert_eq!(trace.thread_steps, 7000);
        let lrs = trace.learning_rates();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn divergence_surfaces_as_error_and_infinite_loss() {
        let b = bench();
        let run = run_constant_sgd(&b.problem, 0.5, &theta0(&b), &RngStream::new(3, 3), 20);
        assert!(matches!(run, Err(Error::Divergence { thread: 0, .. })));
        assert_eq!(final_log_loss(run).unwrap(), f64::INFINITY);
        let bad = Err(Error::invalid("x"));
        assert!(final_log_loss(bad).is_err());
    }

    #[test]
    fn splitsgd_with_zero_q_decays_every_diagnostic() {
        let b = bench();
        let mut cfg = SplitSgdConfig::convex_defaults(1e-2, 1000);
        cfg.q = 0.0;
        cfg.t1 = 1000;
        let trace = run_splitsgd(&b.problem, &cfg, &theta0(&b), &RngStream::new(5, 5), 12).unwrap();
        // 1 + 1 + 2 + 1 + 4 + 1 = 10 epochs, then 2 more of an 8-epoch thread
        let events: Vec<(u64, Event, f64)> = trace
            .events()
            .map(|r| (r.epoch, r.event, r.learning_rate))
            .collect();
        assert_eq!(
            events,
            vec![
                (2, Event::DiagnosticS, 5e-3),
                (5, Event::DiagnosticS, 2.5e-3),
                (10, Event::DiagnosticS, 1.25e-3)
            ]
        );
        assert_eq!(
            trace.total_gradient_evals(),
            trace.thread_steps + 2 * 1000 * 3
        );
        assert_eq!(trace.thread_steps, 1000 + 2000 + 4000 + 2000);
    }

    #[test]
    fn invalid_configs() {
        let b = bench();
        let mut cfg = SplitSgdConfig::convex_defaults(1e-2, 1000);
        cfg.gamma = 1.0;
        assert!(run_splitsgd(&b.problem, &cfg, &theta0(&b), &RngStream::new(0, 0), 1).is_err());
        cfg.gamma = 0.5;
        cfg.t1 = 0;
        assert!(run_splitsgd(&b.problem, &cfg, &theta0(&b), &RngStream::new(0, 0), 1).is_err());
        assert!(run_constant_sgd(&b.problem, 1e-3, &theta0(&b), &RngStream::new(0, 0), 0).is_err());
        assert!("adam".parse::<Method>().is_err());
        assert_eq!("half".parse::<Method>().unwrap(), Method::Half);
    }
}
