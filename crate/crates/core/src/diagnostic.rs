//! The splitting diagnostic.
//!
//! Two SGD threads start from the same point with independent gradient
//! streams. Each runs `w` windows of `l` steps at a constant rate; the
//! per-window mean gradients of the two threads are compared through their
//! inner product (the gradient coherence `Q_i`). Stationarity is declared when
//! the count of negative coherences, with zeros counting one half, reaches
//! `q·w`. The continuation point is the midpoint of the two final iterates.

use crate::error::{Error, Result};
use crate::kernel::{KernelKind, OptimizerKernel};
use crate::oracle::{GradientOracle, GradientSample};
use crate::rng::{RngStream, StreamRng};
use crate::scalar::Scalar;
use crate::vector::{check_dim, dot_slices, ParamVector};

/// Child ids of the two thread streams forked from the diagnostic's stream.
pub const THREAD_STREAM_IDS: [u64; 2] = [1, 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagnosticConfig<T> {
    /// Constant learning rate of both threads.
    pub eta: T,
    /// Number of windows `w`.
    pub windows: usize,
    /// Window length `l`.
    pub window_len: usize,
    /// Tolerance `q`: minimum proportion of negative coherences.
    pub q: f64,
}

impl<T: Scalar> DiagnosticConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !self.eta.is_finite() || self.eta < T::zero() {
            return Err(Error::invalid(format!(
                "diagnostic rate must be finite and >= 0, got {}",
                self.eta
            )));
        }
        if self.windows == 0 || self.window_len == 0 {
            return Err(Error::invalid(
                "window count and window length must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::invalid(format!(
                "q must lie in [0, 1], got {}",
                self.q
            )));
        }
        Ok(())
    }

    /// Steps per thread, `w·l`.
    pub fn thread_len(&self) -> u64 {
        (self.windows * self.window_len) as u64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticResult<T> {
    /// Midpoint of the two threads' last iterates.
    pub theta_d: ParamVector<T>,
    pub stationary: bool,
    /// `Q_1..Q_w`.
    pub coherences: Vec<T>,
    /// `Σ (1 − sign Q_i) / 2`.
    pub negative_count: f64,
    /// `(‖ḡ_i⁽¹⁾‖, ‖ḡ_i⁽²⁾‖)` per window.
    pub window_norms: Vec<(T, T)>,
}

impl<T: Scalar> DiagnosticResult<T> {
    /// Cosine form of the coherences.
    pub fn normalized_coherences(&self) -> Vec<T> {
        self.coherences
            .iter()
            .zip(&self.window_norms)
            .map(|(&q, &(a, b))| cosine(q, a, b))
            .collect()
    }
}

/// `q / (a·b)` clamped to `[−1, 1]`, and 0 when either norm vanishes.
pub fn cosine<T: Scalar>(q: T, norm_a: T, norm_b: T) -> T {
    let denom = norm_a * norm_b;
    if denom == T::zero() {
        return T::zero();
    }
    (q / denom).max(-T::one()).min(T::one())
}

/// The stationarity rule: returns `(count ≥ q·len, count)` with
/// `count = Σ (1 − sign Q_i)/2` and `sign 0 = 0`.
pub fn decide<T: Scalar>(coherences: &[T], q: f64) -> (bool, f64) {
    let count: f64 = coherences
        .iter()
        .map(|&c| {
            if c < T::zero() {
                1.0
            } else if c > T::zero() {
                0.0
            } else {
                0.5
            }
        })
        .sum();
    (count >= q * coherences.len() as f64, count)
}

struct Thread<T> {
    theta: ParamVector<T>,
    kernel: OptimizerKernel<T>,
    rng: StreamRng,
    window_sum: Vec<T>,
    window_start: ParamVector<T>,
    means: Vec<ParamVector<T>>,
}

/// A diagnostic that can be advanced one step at a time; each step moves both
/// threads once. Used directly by schedules that must observe or interrupt a
/// diagnostic at budget boundaries; [`run_diagnostic`] drives it to the end.
pub struct SplitThreads<'o, T: Scalar, O: GradientOracle<T> + ?Sized> {
    oracle: &'o O,
    cfg: DiagnosticConfig<T>,
    threads: [Thread<T>; 2],
    sample: GradientSample<T>,
    steps: u64,
}

impl<'o, T: Scalar, O: GradientOracle<T> + ?Sized> SplitThreads<'o, T, O> {
    /// Threads draw from `stream.fork(1)` and `stream.fork(2)`.
    pub fn new(
        oracle: &'o O,
        theta_in: &ParamVector<T>,
        cfg: DiagnosticConfig<T>,
        kernel: &OptimizerKernel<T>,
        stream: &RngStream,
    ) -> Result<Self> {
        Self::with_streams(
            oracle,
            theta_in,
            cfg,
            kernel,
            [
                stream.fork(THREAD_STREAM_IDS[0]),
                stream.fork(THREAD_STREAM_IDS[1]),
            ],
        )
    }

    pub fn with_streams(
        oracle: &'o O,
        theta_in: &ParamVector<T>,
        cfg: DiagnosticConfig<T>,
        kernel: &OptimizerKernel<T>,
        streams: [RngStream; 2],
    ) -> Result<Self> {
        cfg.validate()?;
        let d = oracle.dim();
        check_dim(d, theta_in.dim())?;
        check_dim(d, kernel.dim())?;
        let make = |s: &RngStream| Thread {
            theta: theta_in.clone(),
            kernel: kernel.fresh(),
            rng: s.rng(),
            window_sum: vec![T::zero(); d],
            window_start: theta_in.clone(),
            means: Vec::with_capacity(cfg.windows),
        };
        Ok(Self {
            oracle,
            cfg,
            threads: [make(&streams[0]), make(&streams[1])],
            sample: GradientSample::zeros(d),
            steps: 0,
        })
    }

    pub fn steps_done(&self) -> u64 {
        self.steps
    }

    pub fn total_steps(&self) -> u64 {
        self.cfg.thread_len()
    }

    pub fn is_complete(&self) -> bool {
        self.steps >= self.total_steps()
    }

    /// Current iterate of thread `k` (0 or 1).
    pub fn iterate(&self, k: usize) -> &ParamVector<T> {
        &self.threads[k].theta
    }

    /// Midpoint of the two current iterates.
    pub fn midpoint(&self) -> ParamVector<T> {
        ParamVector::midpoint(&self.threads[0].theta, &self.threads[1].theta)
            .expect("same dimension, finite iterates")
    }

    /// Advances both threads by one step. Errors with
    /// [`Error::Divergence`] (thread 1 or 2, 1-based step) if an iterate or
    /// gradient leaves the finite range.
    pub fn step(&mut self) -> Result<()> {
        if self.is_complete() {
            return Err(Error::invalid("diagnostic already complete"));
        }
        self.steps += 1;
        let step = self.steps;
        let l = self.cfg.window_len as u64;
        let closes_window = step.is_multiple_of(l);
        let eta = self.cfg.eta;
        let plain = matches!(self.cfg_kind(), KernelKind::Plain);
        for (k, th) in self.threads.iter_mut().enumerate() {
            let diverged = |e| as_divergence(e, k as u8 + 1, step);
            self.oracle
                .draw(&th.theta, &mut th.rng, &mut self.sample)
                .map_err(diverged)?;
            th.kernel
                .step(&mut th.theta, &self.sample.gradient, eta, step)
                .map_err(diverged)?;
            for (acc, &g) in th
                .window_sum
                .iter_mut()
                .zip(self.sample.gradient.as_slice())
            {
                *acc += g;
            }
            if closes_window {
                let inv = T::one() / T::lit(self.cfg.window_len as f64);
                let mean: Vec<T> = th.window_sum.iter().map(|&s| s * inv).collect();
                let mean = ParamVector::new(mean).map_err(diverged)?;
                if plain && eta > T::zero() {
                    debug_assert_iterate_difference(
                        &th.window_start,
                        &th.theta,
                        &mean,
                        eta,
                        self.cfg.window_len,
                    );
                }
                th.means.push(mean);
                th.window_sum.iter_mut().for_each(|s| *s = T::zero());
                th.window_start = th.theta.clone();
            }
        }
        Ok(())
    }

    fn cfg_kind(&self) -> KernelKind<T> {
        self.threads[0].kernel.kind()
    }

    /// Runs any remaining steps and evaluates the decision rule.
    pub fn finish(mut self) -> Result<DiagnosticResult<T>> {
        while !self.is_complete() {
            self.step()?;
        }
        let [a, b] = &self.threads;
        let coherences: Vec<T> = a
            .means
            .iter()
            .zip(&b.means)
            .map(|(x, y)| dot_slices(x.as_slice(), y.as_slice()))
            .collect();
        let window_norms = a
            .means
            .iter()
            .zip(&b.means)
            .map(|(x, y)| (x.norm(), y.norm()))
            .collect();
        let (stationary, negative_count) = decide(&coherences, self.cfg.q);
        Ok(DiagnosticResult {
            theta_d: self.midpoint(),
            stationary,
            coherences,
            negative_count,
            window_norms,
        })
    }
}

pub(crate) fn as_divergence(e: Error, thread: u8, step: u64) -> Error {
    match e {
        Error::NonFinite { .. } | Error::Invalid(_) => Error::Divergence { thread, step },
        other => other,
    }
}

/// Checks `ḡ_i = (θ_{(i−1)l} − θ_{il}) / (l·η)` for the plain kernel.
fn debug_assert_iterate_difference<T: Scalar>(
    start: &ParamVector<T>,
    end: &ParamVector<T>,
    mean: &ParamVector<T>,
    eta: T,
    window_len: usize,
) {
    if !cfg!(debug_assertions) {
        return;
    }
    let scale_len = T::lit(window_len as f64) * eta;
    let base_tol = T::lit(1e-9).max(T::epsilon() * T::lit(1e4));
    let scale = start.max_abs().max(end.max_abs()) / scale_len;
    let tol = base_tol * (T::one() + scale + mean.max_abs());
    for j in 0..mean.dim() {
        let via_iterates = (start[j] - end[j]) / scale_len;
        debug_assert!(
            (via_iterates - mean[j]).abs() <= tol,
            "window mean {} disagrees with iterate difference {} at coordinate {j}",
            mean[j],
            via_iterates
        );
    }
}

/// Runs the full diagnostic from `theta_in`: `2·w·l` oracle calls.
pub fn run_diagnostic<T: Scalar, O: GradientOracle<T> + ?Sized>(
    oracle: &O,
    theta_in: &ParamVector<T>,
    cfg: DiagnosticConfig<T>,
    kernel: &OptimizerKernel<T>,
    stream: &RngStream,
) -> Result<DiagnosticResult<T>> {
    SplitThreads::new(oracle, theta_in, cfg, kernel, stream)?.finish()
}

/// Per-window cosine coherences `Q_i / (‖ḡ_i⁽¹⁾‖·‖ḡ_i⁽²⁾‖)`.
pub fn gradient_coherence_trace<T: Scalar, O: GradientOracle<T> + ?Sized>(
    oracle: &O,
    theta_in: &ParamVector<T>,
    cfg: DiagnosticConfig<T>,
    kernel: &OptimizerKernel<T>,
    stream: &RngStream,
) -> Result<Vec<T>> {
    Ok(run_diagnostic(oracle, theta_in, cfg, kernel, stream)?.normalized_coherences())
}
