//! Causal sliding-window features.
//!
//! A row ending at minute `t` summarizes each channel over the closed window
//! `[t − W, t]` and never reads a sample after `t`. Rows are emitted every
//! `stride` minutes (aligned to multiples of the stride since the epoch) at
//! end times that fall inside a fitted CBT segment; the target is the
//! `(sin, cos)` encoding of the cosinor phase at `t`.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::circular::{encode_phase, EncodedTarget};
use crate::cosinor::PhaseReference;
use crate::data_model::{ChannelId, ParticipantRecording, SampleSeries, Timestamp};
use crate::error::{Error, Result};
use crate::num::{Matrix, Real};

/// Descriptor suffixes, in feature order within each channel.
pub const DESCRIPTORS: [&str; 6] = ["mean", "sd", "min", "max", "last", "slope_per_min"];

/// Window lengths evaluated by default, in minutes.
pub const DEFAULT_WINDOWS: [usize; 6] = [30, 60, 120, 240, 480, 1440];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_minutes: usize,
    pub stride_minutes: usize,
    /// Minimum fraction of valid minutes per channel in `[t − W, t]`.
    pub min_coverage: f64,
}

impl WindowConfig {
    pub fn new(window_minutes: usize) -> Self {
        Self {
            window_minutes,
            stride_minutes: 10,
            min_coverage: 0.8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_minutes < 2 {
            return Err(Error::InvalidWindow(format!(
                "window {} < 2 minutes",
                self.window_minutes
            )));
        }
        if self.stride_minutes == 0 {
            return Err(Error::InvalidWindow("stride must be positive".into()));
        }
        if !(self.min_coverage > 0.0 && self.min_coverage <= 1.0) {
            return Err(Error::InvalidWindow(format!(
                "min_coverage {} outside (0, 1]",
                self.min_coverage
            )));
        }
        Ok(())
    }
}

/// Cumulative sensor groups M1..M7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
    M7,
}

impl Modality {
    pub const ALL: [Modality; 7] = [
        Modality::M1,
        Modality::M2,
        Modality::M3,
        Modality::M4,
        Modality::M5,
        Modality::M6,
        Modality::M7,
    ];

    pub fn channels(self) -> &'static [ChannelId] {
        use ChannelId::*;
        match self {
            Modality::M1 => &[LightLux],
            Modality::M2 => &[MotionCounts, AccNet],
            Modality::M3 => &[SkinTemp],
            Modality::M4 => &[HeartRate],
            Modality::M5 => &[LightLux, MotionCounts, AccNet],
            Modality::M6 => &[LightLux, MotionCounts, AccNet, SkinTemp],
            Modality::M7 => &[LightLux, MotionCounts, AccNet, SkinTemp, HeartRate],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Modality::M1 => "Light",
            Modality::M2 => "Activity",
            Modality::M3 => "Skin Temperature",
            Modality::M4 => "Cardiovascular",
            Modality::M5 => "Light + Activity",
            Modality::M6 => "Light + Activity + Temp",
            Modality::M7 => "All modalities",
        }
    }

    pub fn n_features(self) -> usize {
        DESCRIPTORS.len() * self.channels().len()
    }

    /// `<channel>_<descriptor>` for every feature column.
    pub fn feature_names(self) -> Vec<String> {
        self.channels()
            .iter()
            .flat_map(|c| {
                DESCRIPTORS
                    .iter()
                    .map(move |d| format!("{}_{}", c.name(), d))
            })
            .collect()
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Modality::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown modality {s:?}")))
    }
}

/// `[mean, sd, min, max, last, slope]` of a window. `minutes_rel` are the
/// ascending offsets of the values relative to the window end; the slope is
/// the least-squares trend in units per minute and `sd` uses n − 1.
pub fn window_stats<T: Real>(values: &[T], minutes_rel: &[i64]) -> Result<[T; 6]> {
    assert_eq!(values.len(), minutes_rel.len());
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let nf = T::from_count(n);
    let mut sum = T::zero();
    let mut min = T::infinity();
    let mut max = T::neg_infinity();
    let mut tsum = T::zero();
    for (&v, &m) in values.iter().zip(minutes_rel) {
        sum += v;
        min = min.min(v);
        max = max.max(v);
        tsum += T::from_i64(m).expect("minute offset");
    }
    let mean = sum / nf;
    let tmean = tsum / nf;
    let (mut ss, mut sxy, mut sxx) = (T::zero(), T::zero(), T::zero());
    for (&v, &m) in values.iter().zip(minutes_rel) {
        let dv = v - mean;
        let dt = T::from_i64(m).expect("minute offset") - tmean;
        ss += dv * dv;
        sxy += dt * dv;
        sxx += dt * dt;
    }
    let sd = (ss / (nf - T::one())).sqrt();
    let slope = if sxx > T::zero() {
        sxy / sxx
    } else {
        T::zero()
    };
    Ok([mean, sd, min, max, values[n - 1], slope])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub participant_id: Arc<str>,
    pub end_time: Timestamp,
    pub features: Vec<f64>,
    pub target: EncodedTarget<f64>,
    pub ref_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDataset {
    pub modality: Modality,
    pub window: WindowConfig,
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureDataset {
    pub fn empty(modality: Modality, window: WindowConfig) -> Self {
        Self {
            modality,
            window,
            feature_names: modality.feature_names(),
            rows: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Concatenates datasets built with the same configuration.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a FeatureDataset>) -> Option<Self> {
        let mut it = parts.into_iter();
        let mut out = it.next()?.clone();
        for p in it {
            assert_eq!(
                p.feature_names, out.feature_names,
                "incompatible feature sets"
            );
            out.rows.extend(p.rows.iter().cloned());
        }
        Some(out)
    }

    pub fn features(&self) -> Matrix<f64> {
        let rows: Vec<&[f64]> = self.rows.iter().map(|r| r.features.as_slice()).collect();
        Matrix::from_rows(&rows, self.feature_names.len())
    }

    pub fn targets(&self) -> Vec<[f64; 2]> {
        self.rows.iter().map(|r| r.target.as_array()).collect()
    }

    pub fn ref_theta(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ref_theta).collect()
    }

    /// CSV with `participant_id,end_time`, the feature columns, then
    /// `target_sin,target_cos,ref_theta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("participant_id,end_time");
        for n in &self.feature_names {
            out.push(',');
            out.push_str(n);
        }
        out.push_str(",target_sin,target_cos,ref_theta\n");
        for r in &self.rows {
            let _ = write!(out, "{},{}", r.participant_id, r.end_time);
            for v in &r.features {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(
                out,
                ",{},{},{}",
                r.target.y_sin, r.target.y_cos, r.ref_theta
            );
        }
        out
    }
}

/// Row end times: stride-aligned minutes on the recording grid that fall in a
/// fitted segment.
fn end_times(
    rec: &ParticipantRecording,
    reference: &PhaseReference,
    stride: usize,
) -> Vec<Timestamp> {
    let stride = stride as i64;
    let (grid_start, grid_end) = (rec.origin().0, rec.cbt.end().0);
    let mut out = Vec::new();
    for seg in &reference.segments {
        let first = seg.interval.start.0.max(grid_start);
        let mut t = first.div_euclid(stride) * stride;
        if t < first {
            t += stride;
        }
        while t <= seg.interval.end.0 && t < grid_end {
            out.push(Timestamp(t));
            t += stride;
        }
    }
    out
}

/// Valid `(offset, value)` pairs of `s` inside `[t − W, t]`, plus the count of
/// grid minutes the window spans (including minutes before the recording).
fn window_slice(s: &SampleSeries, t: Timestamp, w: usize, vals: &mut Vec<f64>, rel: &mut Vec<i64>) {
    vals.clear();
    rel.clear();
    let lo = (t.0 - w as i64).max(s.start.0);
    let hi = t.0.min(s.end().0 - 1);
    for m in lo..=hi {
        let i = (m - s.start.0) as usize;
        if s.valid()[i] {
            vals.push(s.values()[i]);
            rel.push(m - t.0);
        }
    }
}

fn channels_for(rec: &ParticipantRecording, modality: Modality) -> Result<Vec<&SampleSeries>> {
    modality
        .channels()
        .iter()
        .map(|&c| rec.channels.get(&c).ok_or(Error::MissingChannel(c)))
        .collect()
}

fn covered(n_valid: usize, win: &WindowConfig) -> bool {
    n_valid >= 2 && n_valid as f64 >= win.min_coverage * (win.window_minutes + 1) as f64
}

/// Builds the feature rows of one preprocessed participant.
pub fn build_dataset(
    rec: &ParticipantRecording,
    reference: &PhaseReference,
    modality: Modality,
    win: &WindowConfig,
) -> Result<FeatureDataset> {
    win.validate()?;
    let chans = channels_for(rec, modality)?;
    let pid: Arc<str> = Arc::from(rec.participant_id.as_str());
    let mut ds = FeatureDataset::empty(modality, *win);
    let (mut vals, mut rel) = (Vec::new(), Vec::new());
    'rows: for t in end_times(rec, reference, win.stride_minutes) {
        let mut features = Vec::with_capacity(modality.n_features());
        for s in &chans {
            window_slice(s, t, win.window_minutes, &mut vals, &mut rel);
            if !covered(vals.len(), win) {
                continue 'rows;
            }
            features.extend_from_slice(&window_stats(&vals, &rel)?);
        }
        let Some(theta) = reference.phase_at(t) else {
            continue;
        };
        ds.rows.push(FeatureRow {
            participant_id: pid.clone(),
            end_time: t,
            features,
            target: encode_phase(theta)?,
            ref_theta: theta,
        });
    }
    if ds.is_empty() {
        return Err(Error::NoCoverage(rec.participant_id.clone()));
    }
    Ok(ds)
}

/// Minute-level window for sequence models: the `W` most recent minutes
/// `(t − W, t]` for each channel, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceWindow {
    pub end_time: Timestamp,
    /// `W × channels`, NaN where masked.
    pub values: Matrix<f64>,
    pub mask: Matrix<bool>,
    pub ref_theta: f64,
}

/// Same row selection as [`build_dataset`], exposing raw minute values.
pub fn sequence_view(
    rec: &ParticipantRecording,
    reference: &PhaseReference,
    modality: Modality,
    win: &WindowConfig,
) -> Result<Vec<SequenceWindow>> {
    win.validate()?;
    let chans = channels_for(rec, modality)?;
    let w = win.window_minutes;
    let (mut vals, mut rel) = (Vec::new(), Vec::new());
    let mut out = Vec::new();
    'rows: for t in end_times(rec, reference, win.stride_minutes) {
        for s in &chans {
            window_slice(s, t, w, &mut vals, &mut rel);
            if !covered(vals.len(), win) {
                continue 'rows;
            }
        }
        let Some(theta) = reference.phase_at(t) else {
            continue;
        };
        let mut values = Vec::with_capacity(w * chans.len());
        let mut mask = Vec::with_capacity(w * chans.len());
        for k in 0..w as i64 {
            let m = t.0 - (w as i64 - 1) + k;
            for s in &chans {
                let v = s.index_of(Timestamp(m)).and_then(|i| s.get(i));
                values.push(v.unwrap_or(f64::NAN));
                mask.push(v.is_some());
            }
        }
        out.push(SequenceWindow {
            end_time: t,
            values: Matrix::new(values, w, chans.len()),
            mask: Matrix::new(mask, w, chans.len()),
            ref_theta: theta,
        });
    }
    if out.is_empty() {
        return Err(Error::NoCoverage(rec.participant_id.clone()));
    }
    Ok(out)
}
