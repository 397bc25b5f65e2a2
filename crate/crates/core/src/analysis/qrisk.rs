//! Type-I error of the stationarity test under the fair-coin model.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QRiskQuery {
    pub w: usize,
    pub q: f64,
}

/// Smallest integer negative count accepted as stationary: `⌈q·w⌉`, using
/// the same floating-point product as [`crate::diagnostic::decide`].
pub fn rejection_threshold(w: usize, q: f64) -> u64 {
    (q * w as f64).ceil() as u64
}

/// `2^{−w} · Σ_{i < ⌈q·w⌉} C(w, i)`: the probability that a Binomial(w, ½)
/// negative count stays below the threshold, i.e. that a stationary phase is
/// reported as non-stationary. Binomials are summed exactly.
pub fn type1_error_probability(query: QRiskQuery) -> Result<f64> {
    let QRiskQuery { w, q } = query;
    if w == 0 {
        return Err(Error::invalid("w must be positive"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("q must lie in [0, 1], got {q}")));
    }
    let upper = rejection_threshold(w, q).min(w as u64 + 1);
    let mut sum = BigUint::zero();
    let mut binom = BigUint::one();
    for i in 0..upper {
        sum += &binom;
        binom = binom * (w as u64 - i) / (i + 1);
    }
    Ok(scale_by_pow2(&sum, w))
}

/// `x · 2^{−w}` without overflowing the intermediate `f64`.
fn scale_by_pow2(x: &BigUint, w: usize) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let bits = x.bits() as i64;
    let shift = (bits - 64).max(0);
    let top = (x >> shift as u64).to_f64().expect("64-bit value converts");
    top * 2f64.powf((shift - w as i64) as f64)
}
