//! Stopping-time comparison between the splitting diagnostic and the
//! running-sum (pflug) diagnostic.

use crate::error::{Error, Result};
use crate::kernel::OptimizerKernel;
use crate::oracle::{GradientSample, Objective};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::vector::{check_dim, dot_slices, ParamVector};

use super::runs::{split_sgd_core, SplitSgdConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Detection {
    /// Stationarity declared after this many epochs.
    Detected { epoch: u64 },
    /// No detection within the epoch budget.
    Capped { max_epochs: u64 },
}

impl Detection {
    /// Detection epoch, or the cap when the budget ran out.
    pub fn epoch_or_cap(&self) -> u64 {
        match *self {
            Detection::Detected { epoch } => epoch,
            Detection::Capped { max_epochs } => max_epochs,
        }
    }

    pub fn is_capped(&self) -> bool {
        matches!(self, Detection::Capped { .. })
    }
}

/// Constant-rate SGD accumulating `S ← S + ⟨g_t, g_{t−1}⟩` from the second
/// gradient on; stops at the first epoch boundary where `S < 0`.
pub fn run_pflug_detection<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    eta: T,
    theta0: &ParamVector<T>,
    stream: &RngStream,
    max_epochs: u64,
) -> Result<Detection> {
    check_dim(objective.dim(), theta0.dim())?;
    if max_epochs == 0 {
        return Err(Error::invalid("max epochs must be at least one"));
    }
    let d = objective.dim();
    let n = objective.epoch_len() as u64;
    let mut kernel = OptimizerKernel::plain(d);
    let mut rng = stream.rng();
    let mut theta = theta0.clone();
    let mut current = GradientSample::zeros(d);
    let mut previous = GradientSample::zeros(d);
    let mut running = T::zero();
    for t in 1..=max_epochs * n {
        objective
            .draw(&theta, &mut rng, &mut current)
            .map_err(|_| Error::Divergence { thread: 0, step: t })?;
        if t >= 2 {
            running += dot_slices(current.gradient.as_slice(), previous.gradient.as_slice());
            if !running.is_finite() {
                return Err(Error::Divergence { thread: 0, step: t });
            }
        }
        kernel
            .step(&mut theta, &current.gradient, eta, t)
            .map_err(|_| Error::Divergence { thread: 0, step: t })?;
        std::mem::swap(&mut current, &mut previous);
        if t % n == 0 && running < T::zero() {
            return Ok(Detection::Detected { epoch: t / n });
        }
    }
    Ok(Detection::Capped { max_epochs })
}

/// Runs SplitSGD until its first stationary verdict and reports the epochs
/// consumed (threads plus one epoch-equivalent `w·l` per diagnostic),
/// rounded up to whole epochs.
pub fn run_split_detection<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    cfg: &SplitSgdConfig<T>,
    theta0: &ParamVector<T>,
    stream: &RngStream,
    max_epochs: u64,
) -> Result<Detection> {
    let outcome = split_sgd_core(objective, cfg, theta0, stream, max_epochs, true)?;
    Ok(match outcome.first_detection {
        Some(units) => Detection::Detected {
            epoch: units.div_ceil(outcome.epoch_len),
        },
        None => Detection::Capped { max_epochs },
    })
}
