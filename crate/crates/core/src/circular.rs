//! Circular phase encoding and wrapped-error metrics.
//!
//! Phases are angles in radians on `[0, 2π)`, with `0..2π` mapping linearly
//! onto `0..24` h. Targets are carried as `(sin θ, cos θ)` pairs so that the
//! regression never sees the wrap at midnight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// `(sin θ, cos θ)` encoding of a phase. Model outputs need not be unit norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodedTarget<T> {
    pub y_sin: T,
    pub y_cos: T,
}

impl<T: Real> EncodedTarget<T> {
    pub fn as_array(self) -> [T; 2] {
        [self.y_sin, self.y_cos]
    }
}

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_phase<T: Real>(theta: T) -> T {
    let two_pi = T::TAU();
    let r = theta % two_pi;
    let r = if r < T::zero() { r + two_pi } else { r };
    // `r + 2π` can round up to exactly 2π for tiny negative inputs
    if r >= two_pi {
        T::zero()
    } else {
        r
    }
}

pub fn encode_phase<T: Real>(theta: T) -> Result<EncodedTarget<T>> {
    if !theta.is_finite() {
        return Err(Error::NonFinite);
    }
    let (s, c) = wrap_phase(theta).sin_cos();
    Ok(EncodedTarget { y_sin: s, y_cos: c })
}

/// `atan2(y_sin, y_cos)` mapped onto `[0, 2π)`. Magnitude is irrelevant.
pub fn decode_phase<T: Real>(y_sin: T, y_cos: T) -> Result<T> {
    if !y_sin.is_finite() || !y_cos.is_finite() {
        return Err(Error::NonFinite);
    }
    if y_sin == T::zero() && y_cos == T::zero() {
        return Err(Error::ZeroVector);
    }
    Ok(wrap_phase(y_sin.atan2(y_cos)))
}

pub fn phase_to_hours<T: Real>(theta: T) -> T {
    theta * T::lit(24.0) / T::TAU()
}

pub fn hours_to_phase<T: Real>(hours: T) -> T {
    hours * T::TAU() / T::lit(24.0)
}

/// Signed error wrapped into `[-π, π)`.
pub fn wrapped_error<T: Real>(pred: T, reference: T) -> T {
    let pi = T::PI();
    wrap_phase(pred - reference + pi) - pi
}

/// Mean of `|wrapped error|^q` over paired phases.
pub fn circular_moment<T: Real>(pred: &[T], reference: &[T], q: T) -> Result<T> {
    check_pairs(pred, reference)?;
    let n = T::from_count(pred.len());
    let sum: T = pred
        .iter()
        .zip(reference)
        .map(|(&p, &r)| wrapped_error(p, r).abs().powf(q))
        .sum();
    Ok(sum / n)
}

fn check_pairs<T>(pred: &[T], reference: &[T]) -> Result<()> {
    if pred.len() != reference.len() {
        return Err(Error::LengthMismatch(pred.len(), reference.len()));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Summary of circular errors over a set of predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<T> {
    pub n: usize,
    /// First-order moment, radians.
    pub mean_abs_error: T,
    /// Second-order moment, radians².
    pub mean_sq_error: T,
    pub cmae_hours: T,
    /// Fraction of absolute errors ≤ 1 h (inclusive).
    pub within_1h: T,
    /// Fraction of absolute errors ≤ 2 h (inclusive).
    pub within_2h: T,
}

impl<T: Real> MetricsReport<T> {
    /// Moment of order `q` for the orders kept in the report.
    pub fn moment(&self, q: u32) -> Option<T> {
        match q {
            1 => Some(self.mean_abs_error),
            2 => Some(self.mean_sq_error),
            _ => None,
        }
    }
}

pub fn metrics_report<T: Real>(pred: &[T], reference: &[T]) -> Result<MetricsReport<T>> {
    check_pairs(pred, reference)?;
    let n = pred.len();
    let mut s1 = T::zero();
    let mut s2 = T::zero();
    let mut w1 = 0usize;
    let mut w2 = 0usize;
    let mut sh = T::zero();
    // absorbs rounding in the wrap so that an error of exactly 1 h counts
    let tol = T::epsilon() * T::lit(64.0);
    let day = T::lit(24.0);
    for (&p, &r) in pred.iter().zip(reference) {
        let e = wrapped_error(p, r).abs();
        s1 += e;
        s2 += e * e;
        // wrapping on the clock face keeps whole-hour errors exact
        let d = (phase_to_hours(wrap_phase(p)) - phase_to_hours(wrap_phase(r))).abs();
        let eh = d.min(day - d);
        sh += eh;
        if eh <= T::one() + tol {
            w1 += 1;
        }
        if eh <= T::lit(2.0) + tol {
            w2 += 1;
        }
    }
    let nf = T::from_count(n);
    let mean_abs_error = s1 / nf;
    Ok(MetricsReport {
        n,
        mean_abs_error,
        mean_sq_error: s2 / nf,
        cmae_hours: sh / nf,
        within_1h: T::from_count(w1) / nf,
        within_2h: T::from_count(w2) / nf,
    })
}
