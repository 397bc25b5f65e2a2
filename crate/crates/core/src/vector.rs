//! Dense parameter vectors.

use std::ops::Index;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense coordinate vector holding an iterate, a gradient or a model truth.
///
/// Coordinates are finite whenever a value of this type is observable from
/// outside the crate: constructors validate, and every fallible update checks
/// the result before committing it.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector<T> {
    coords: Vec<T>,
}

impl<T: Scalar> ParamVector<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if let Some(j) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("coordinate {j} is not finite")));
        }
        Ok(Self { coords })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coords: vec![T::zero(); dim],
        }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize) -> T) -> Result<Self> {
        Self::new((0..dim).map(f).collect())
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.coords
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.coords
    }

    pub fn into_vec(self) -> Vec<T> {
        self.coords
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.coords.iter()
    }

    /// Euclidean inner product, summed left to right.
    pub fn dot(&self, other: &Self) -> Result<T> {
        check_dim(self.dim(), other.dim())?;
        Ok(dot_slices(&self.coords, &other.coords))
    }

    pub fn norm(&self) -> T {
        dot_slices(&self.coords, &self.coords).sqrt()
    }

    /// Coordinate-wise `(a + b) / 2`.
    pub fn midpoint(a: &Self, b: &Self) -> Result<Self> {
        check_dim(a.dim(), b.dim())?;
        let half = T::lit(0.5);
        Self::new(
            a.coords
                .iter()
                .zip(&b.coords)
                .map(|(&x, &y)| (x + y) * half)
                .collect(),
        )
    }

    /// Same entries in reverse coordinate order.
    pub fn reversed(&self) -> Self {
        let mut coords = self.coords.clone();
        coords.reverse();
        Self { coords }
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: T, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Self::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(&x, &y)| x + alpha * y)
                .collect(),
        )
    }

    pub fn max_abs(&self) -> T {
        self.coords
            .iter()
            .fold(T::zero(), |m, &c| if c.abs() > m { c.abs() } else { m })
    }

    pub fn to_f64(&self) -> ParamVector<f64> {
        ParamVector {
            coords: self.coords.iter().map(|c| c.as_f64()).collect(),
        }
    }
}

impl<T> Index<usize> for ParamVector<T> {
    type Output = T;

    fn index(&self, j: usize) -> &T {
        &self.coords[j]
    }
}

/// Euclidean inner product of two parameter vectors.
pub fn dot<T: Scalar>(a: &ParamVector<T>, b: &ParamVector<T>) -> Result<T> {
    a.dot(b)
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Left-to-right inner product over equal-length slices.
#[inline]
pub(crate) fn dot_slices<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> ParamVector<f64> {
        ParamVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn dot_examples() {
        assert_eq!(
            dot(&v(&[1.0, 2.0, 3.0]), &v(&[4.0, 5.0, 6.0])).unwrap(),
            32.0
        );
        let a = v(&[3.0, 4.0]);
        assert_eq!(a.dot(&a).unwrap(), 25.0);
        assert_eq!(a.norm(), 5.0);
        assert_eq!(dot(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
    }

    #[test]
    fn dot_rejects_mismatched_dimensions() {
        let err = dot(&v(&[1.0, 2.0]), &v(&[1.0])).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn construction_rejects_non_finite() {
        assert!(ParamVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(ParamVector::new(vec![f64::INFINITY]).is_err());
        assert!(ParamVector::<f32>::new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn midpoint_and_reverse() {
        let m = ParamVector::midpoint(&v(&[0.0, 2.0]), &v(&[2.0, 4.0])).unwrap();
        assert_eq!(m, v(&[1.0, 3.0]));
        let a = v(&[1.0, 2.0, 3.0]);
        assert_eq!(a.reversed(), v(&[3.0, 2.0, 1.0]));
        assert_eq!(a.reversed().reversed(), a);
    }

    #[test]
    fn dot_is_symmetric_bitwise() {
        let a = v(&[0.1, -0.7, 1e-3, 5.5]);
        let b = v(&[3.3, 0.2, -9.0, 0.125]);
        assert_eq!(a.dot(&b).unwrap().to_bits(), b.dot(&a).unwrap().to_bits());
    }
}
