//! Update rules: plain SGD and heavy-ball momentum.

use crate::error::{Error, Result};
use crate::oracle::GradientSample;
use crate::scalar::Scalar;
use crate::vector::{check_dim, ParamVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelKind<T> {
    /// `θ ← θ − η·g`
    Plain,
    /// `v ← μ·v + g; θ ← θ − η·v`
    Momentum { coefficient: T },
}

/// Update rule plus its per-run state (the momentum velocity).
///
/// The velocity belongs to a single optimizer thread; [`OptimizerKernel::fresh`]
/// hands out a zeroed copy for a new thread.
#[derive(Clone, Debug)]
pub struct OptimizerKernel<T> {
    kind: KernelKind<T>,
    velocity: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Scalar> OptimizerKernel<T> {
    pub fn plain(dim: usize) -> Self {
        Self {
            kind: KernelKind::Plain,
            velocity: Vec::new(),
            scratch: vec![T::zero(); dim],
        }
    }

    pub fn momentum(dim: usize, coefficient: T) -> Result<Self> {
        if !(coefficient >= T::zero() && coefficient < T::one()) {
            return Err(Error::invalid(format!(
                "momentum coefficient must lie in [0, 1), got {coefficient}"
            )));
        }
        Ok(Self {
            kind: KernelKind::Momentum { coefficient },
            velocity: vec![T::zero(); dim],
            scratch: vec![T::zero(); dim],
        })
    }

    pub fn from_kind(dim: usize, kind: KernelKind<T>) -> Result<Self> {
        match kind {
            KernelKind::Plain => Ok(Self::plain(dim)),
            KernelKind::Momentum { coefficient } => Self::momentum(dim, coefficient),
        }
    }

    pub fn kind(&self) -> KernelKind<T> {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.scratch.len()
    }

    /// Current velocity; empty for the plain kernel.
    pub fn velocity(&self) -> &[T] {
        &self.velocity
    }

    pub fn reset(&mut self) {
        self.velocity.iter_mut().for_each(|v| *v = T::zero());
    }

    /// Same rule, zero velocity.
    pub fn fresh(&self) -> Self {
        let mut k = self.clone();
        k.reset();
        k
    }

    /// Applies one update to `theta` in place. On error neither `theta` nor
    /// the velocity is modified.
    pub fn step(
        &mut self,
        theta: &mut ParamVector<T>,
        grad: &ParamVector<T>,
        eta: T,
        iteration: u64,
    ) -> Result<()> {
        check_dim(self.dim(), theta.dim())?;
        check_dim(self.dim(), grad.dim())?;
        if eta.is_nan() || eta < T::zero() {
            return Err(Error::invalid(format!(
                "learning rate must be >= 0, got {eta}"
            )));
        }
        let g = grad.as_slice();
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { iteration });
        }
        match self.kind {
            KernelKind::Plain => {
                let th = theta.as_slice();
                for ((s, &t), &gj) in self.scratch.iter_mut().zip(th).zip(g) {
                    *s = t - eta * gj;
                    if !s.is_finite() {
                        return Err(Error::NonFinite { iteration });
                    }
                }
                theta.as_mut_slice().copy_from_slice(&self.scratch);
            }
            KernelKind::Momentum { coefficient } => {
                // scratch holds the new velocity until the iterate is known to be finite
                let th = theta.as_slice();
                for (((s, &v), &t), &gj) in
                    self.scratch.iter_mut().zip(&self.velocity).zip(th).zip(g)
                {
                    *s = coefficient * v + gj;
                    if !s.is_finite() || !(t - eta * *s).is_finite() {
                        return Err(Error::NonFinite { iteration });
                    }
                }
                self.velocity.copy_from_slice(&self.scratch);
                for (t, &v) in theta.as_mut_slice().iter_mut().zip(&self.velocity) {
                    *t -= eta * v;
                }
            }
        }
        Ok(())
    }
}

/// One SGD update `θ' = θ − η·g` (or its momentum form), returning the new
/// iterate and leaving `theta` untouched.
pub fn sgd_step<T: Scalar>(
    theta: &ParamVector<T>,
    sample: &GradientSample<T>,
    eta: T,
    kernel: &mut OptimizerKernel<T>,
    iteration: u64,
) -> Result<ParamVector<T>> {
    let mut next = theta.clone();
    kernel.step(&mut next, &sample.gradient, eta, iteration)?;
    Ok(next)
}
