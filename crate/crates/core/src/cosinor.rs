//! Single-component 24-hour cosinor fitted to core body temperature.
//!
//! The model is `T(t) = M + A·cos(ωt + φ)` with `ω = 2π / 1440` rad/min and
//! `t` in absolute minutes since the epoch. It is linear in
//! `(M, β₁, β₂)` after expanding `A·cos(ωt + φ) = β₁·cos ωt + β₂·sin ωt`, so
//! the fit is a 3×3 least-squares solve in closed form; `A = √(β₁² + β₂²)`
//! and `φ = atan2(−β₂, β₁)`.

use serde::{Deserialize, Serialize};

use crate::circular::wrap_phase;
use crate::data_model::{Interval, SampleSeries, Timestamp, MINUTES_PER_DAY};
use crate::error::{Error, Result};
use crate::num::Real;

/// Default minimum span of valid samples accepted by the fit, in minutes.
pub const DEFAULT_MIN_SPAN_MINUTES: i64 = 12 * 60;

/// Angular frequency of the 24 h rhythm in radians per minute.
pub fn omega<T: Real>() -> T {
    T::TAU() / T::from_count(MINUTES_PER_DAY as usize)
}

/// `ω·t mod 2π`, reduced exactly in integer minutes before the conversion.
pub fn clock_angle<T: Real>(t: Timestamp) -> T {
    omega::<T>() * T::from_count(t.minute_of_day() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosinorFit<T> {
    pub mesor: T,
    pub amplitude: T,
    /// Radians in `[0, 2π)`.
    pub acrophase: T,
    pub omega: T,
    pub rmse: T,
    pub n_samples: usize,
    /// Set when the amplitude vanished; `acrophase` is then 0 and meaningless.
    pub degenerate_amplitude: bool,
}

impl<T: Real> CosinorFit<T> {
    pub fn evaluate(&self, t: Timestamp) -> T {
        self.mesor + self.amplitude * (clock_angle::<T>(t) + self.acrophase).cos()
    }

    /// `(ωt + φ) mod 2π`.
    pub fn phase_at(&self, t: Timestamp) -> T {
        wrap_phase(clock_angle::<T>(t) + self.acrophase)
    }
}

/// Reference phase sampled at a set of timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeries<T> {
    pub timestamps: Vec<Timestamp>,
    pub theta: Vec<T>,
}

/// Fits the cosinor to `(minute, value)` samples with the default minimum span.
pub fn fit_cosinor<T: Real>(points: &[(Timestamp, T)]) -> Result<CosinorFit<T>> {
    fit_cosinor_with_span(points, DEFAULT_MIN_SPAN_MINUTES)
}

pub fn fit_cosinor_with_span<T: Real>(
    points: &[(Timestamp, T)],
    min_span_minutes: i64,
) -> Result<CosinorFit<T>> {
    let n = points.len();
    let span = match (
        points.iter().map(|p| p.0).min(),
        points.iter().map(|p| p.0).max(),
    ) {
        (Some(a), Some(b)) => b.0 - a.0,
        _ => 0,
    };
    if n < 3 || span < min_span_minutes {
        return Err(Error::InsufficientSpan {
            span_minutes: span,
            required_minutes: min_span_minutes,
        });
    }

    // normal equations for the design [1, cos ωt, sin ωt]
    let (mut sc, mut ss, mut scc, mut sss, mut scs) =
        (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    let (mut sy, mut syc, mut sys) = (T::zero(), T::zero(), T::zero());
    for &(t, y) in points {
        let (s, c) = clock_angle::<T>(t).sin_cos();
        sc += c;
        ss += s;
        scc += c * c;
        sss += s * s;
        scs += c * s;
        sy += y;
        syc += y * c;
        sys += y * s;
    }
    let nf = T::from_count(n);
    let a = [[nf, sc, ss], [sc, scc, scs], [ss, scs, sss]];
    let b = [sy, syc, sys];
    let [mesor, b1, b2] = solve3(a, b, nf)?;

    let mut amplitude = b1.hypot(b2);
    let degenerate = amplitude <= T::epsilon() * T::lit(1e4) * mesor.abs().max(T::one());
    let acrophase = if degenerate {
        amplitude = T::zero();
        T::zero()
    } else {
        wrap_phase((-b2).atan2(b1))
    };

    let mut sse = T::zero();
    for &(t, y) in points {
        let (s, c) = clock_angle::<T>(t).sin_cos();
        let r = y - (mesor + b1 * c + b2 * s);
        sse += r * r;
    }
    Ok(CosinorFit {
        mesor,
        amplitude,
        acrophase,
        omega: omega(),
        rmse: (sse / nf).sqrt(),
        n_samples: n,
        degenerate_amplitude: degenerate,
    })
}

/// Cramer's rule on a symmetric 3×3 system.
fn solve3<T: Real>(a: [[T; 3]; 3], b: [T; 3], scale: T) -> Result<[T; 3]> {
    let det3 = |m: [[T; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let det = det3(a);
    // det ≈ n³/4 for samples spread evenly over whole days
    if !(det.abs() > T::lit(1e-10) * scale * scale * scale) {
        return Err(Error::SingularSystem);
    }
    let mut out = [T::zero(); 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for row in 0..3 {
            m[row][k] = b[row];
        }
        *o = det3(m) / det;
    }
    Ok(out)
}

/// Fits the valid samples of a series.
pub fn fit_series(cbt: &SampleSeries, min_span_minutes: i64) -> Result<CosinorFit<f64>> {
    let pts: Vec<(Timestamp, f64)> = cbt.valid_points().collect();
    fit_cosinor_with_span(&pts, min_span_minutes)
}

pub fn phase_trajectory<T: Real>(
    fit: &CosinorFit<T>,
    timestamps: &[Timestamp],
) -> Result<PhaseSeries<T>> {
    if fit.degenerate_amplitude {
        return Err(Error::DegenerateFit);
    }
    Ok(PhaseSeries {
        timestamps: timestamps.to_vec(),
        theta: timestamps.iter().map(|&t| fit.phase_at(t)).collect(),
    })
}

/// Fit of one CBT coverage interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit {
    pub interval: Interval,
    pub fit: CosinorFit<f64>,
}

/// Per-segment fits of one participant; phase queries route to the segment
/// containing the timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReference {
    pub segments: Vec<SegmentFit>,
}

impl PhaseReference {
    pub fn segment_at(&self, t: Timestamp) -> Option<&SegmentFit> {
        self.segments.iter().find(|s| s.interval.contains(t))
    }

    pub fn phase_at(&self, t: Timestamp) -> Option<f64> {
        self.segment_at(t).map(|s| s.fit.phase_at(t))
    }
}

/// Independent fit for each coverage interval. Intervals that are too short or
/// degenerate are skipped with a warning.
pub fn fit_per_segment(
    cbt: &SampleSeries,
    coverage: &[Interval],
    min_span_minutes: i64,
) -> PhaseReference {
    let mut segments = Vec::new();
    for iv in coverage {
        let pts: Vec<(Timestamp, f64)> = cbt
            .valid_points()
            .filter(|(t, _)| iv.contains(*t))
            .collect();
        match fit_cosinor_with_span(&pts, min_span_minutes) {
            Ok(fit) if !fit.degenerate_amplitude => {
                segments.push(SegmentFit { interval: *iv, fit })
            }
            Ok(_) => log::warn!("segment starting {} has zero amplitude; skipped", iv.start),
            Err(e) => log::warn!("segment starting {} skipped: {e}", iv.start),
        }
    }
    PhaseReference { segments }
}
