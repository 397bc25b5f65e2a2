//! Gradient-oracle abstraction consumed by the optimizers and the diagnostic.

use crate::error::Result;
use crate::rng::StreamRng;
use crate::scalar::Scalar;
use crate::vector::ParamVector;

/// One noisy gradient `g(θ, Z)` and, when the oracle knows it, the loss of
/// the same datum.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSample<T> {
    pub gradient: ParamVector<T>,
    pub loss: Option<T>,
}

impl<T: Scalar> GradientSample<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            gradient: ParamVector::zeros(dim),
            loss: None,
        }
    }
}

/// Source of unbiased gradient estimates.
pub trait GradientOracle<T: Scalar>: Sync {
    fn dim(&self) -> usize;

    /// Writes one gradient sample at `theta` into `out`, drawing any
    /// randomness from `rng`. Implementations must leave `out` finite or
    /// return an error.
    fn draw(
        &self,
        theta: &ParamVector<T>,
        rng: &mut StreamRng,
        out: &mut GradientSample<T>,
    ) -> Result<()>;

    fn stochastic_gradient(
        &self,
        theta: &ParamVector<T>,
        rng: &mut StreamRng,
    ) -> Result<GradientSample<T>> {
        let mut out = GradientSample::zeros(self.dim());
        self.draw(theta, rng, &mut out)?;
        Ok(out)
    }
}

/// A gradient oracle over a finite training set with an exact loss.
pub trait Objective<T: Scalar>: GradientOracle<T> {
    /// Number of gradient steps that make up one epoch.
    fn epoch_len(&self) -> usize;

    /// Empirical risk at `theta`.
    fn full_loss(&self, theta: &ParamVector<T>) -> Result<T>;
}

impl<T: Scalar, O: GradientOracle<T> + ?Sized> GradientOracle<T> for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn draw(
        &self,
        theta: &ParamVector<T>,
        rng: &mut StreamRng,
        out: &mut GradientSample<T>,
    ) -> Result<()> {
        (**self).draw(theta, rng, out)
    }
}

impl<T: Scalar, O: Objective<T> + ?Sized> Objective<T> for &O {
    fn epoch_len(&self) -> usize {
        (**self).epoch_len()
    }

    fn full_loss(&self, theta: &ParamVector<T>) -> Result<T> {
        (**self).full_loss(theta)
    }
}
