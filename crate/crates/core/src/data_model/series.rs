use serde::{Deserialize, Serialize};

use super::{ChannelId, Timestamp};
use crate::error::{Error, Result};

/// Irregular, second-resolution samples for one channel as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub channel: ChannelId,
    /// `(seconds since epoch, value)`, sorted by time with unique timestamps.
    points: Vec<(i64, f64)>,
}

impl RawSeries {
    /// Sorts the points and averages values that share a timestamp.
    pub fn new(channel: ChannelId, mut points: Vec<(i64, f64)>) -> Self {
        points.sort_by_key(|p| p.0);
        let mut merged: Vec<(i64, f64)> = Vec::with_capacity(points.len());
        let mut i = 0;
        while i < points.len() {
            let t = points[i].0;
            let mut j = i;
            let mut sum = 0.0;
            while j < points.len() && points[j].0 == t {
                sum = if j == i {
                    points[j].1
                } else {
                    sum + points[j].1
                };
                j += 1;
            }
            merged.push((t, sum / (j - i) as f64));
            i = j;
        }
        Self {
            channel,
            points: merged,
        }
    }

    pub fn points(&self) -> &[(i64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first_minute(&self) -> Option<Timestamp> {
        self.points
            .first()
            .map(|p| Timestamp::from_seconds_floor(p.0))
    }

    pub fn last_minute(&self) -> Option<Timestamp> {
        self.points
            .last()
            .map(|p| Timestamp::from_seconds_floor(p.0))
    }
}

/// One channel on a uniform grid. Invalid slots hold NaN and are ignored by
/// every statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSeries {
    pub channel: ChannelId,
    pub start: Timestamp,
    pub step_minutes: i64,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl SampleSeries {
    pub fn new(
        channel: ChannelId,
        start: Timestamp,
        step_minutes: i64,
        values: Vec<f64>,
        valid: Vec<bool>,
    ) -> Self {
        assert_eq!(values.len(), valid.len(), "values/valid length mismatch");
        assert!(step_minutes > 0, "step must be positive");
        let values = values
            .into_iter()
            .zip(&valid)
            .map(|(v, &ok)| if ok { v } else { f64::NAN })
            .collect();
        Self {
            channel,
            start,
            step_minutes,
            values,
            valid,
        }
    }

    /// Builds a series where every finite value is valid.
    pub fn from_values(channel: ChannelId, start: Timestamp, values: Vec<f64>) -> Self {
        let valid = values.iter().map(|v| v.is_finite()).collect();
        Self::new(channel, start, 1, values, valid)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn timestamp(&self, i: usize) -> Timestamp {
        self.start.offset(i as i64 * self.step_minutes)
    }

    /// Exclusive end of the grid.
    pub fn end(&self) -> Timestamp {
        self.timestamp(self.len())
    }

    /// Index of `t` if it falls exactly on the grid.
    pub fn index_of(&self, t: Timestamp) -> Option<usize> {
        let d = t.0 - self.start.0;
        if d < 0 || d % self.step_minutes != 0 {
            return None;
        }
        let i = (d / self.step_minutes) as usize;
        (i < self.len()).then_some(i)
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.valid[i].then(|| self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .map(|(&v, _)| v)
    }

    /// `(timestamp, value)` for every valid slot.
    pub fn valid_points(&self) -> impl Iterator<Item = (Timestamp, f64)> + '_ {
        (0..self.len())
            .filter(move |&i| self.valid[i])
            .map(move |i| (self.timestamp(i), self.values[i]))
    }

    pub fn same_grid(&self, other: &SampleSeries) -> bool {
        self.start == other.start
            && self.step_minutes == other.step_minutes
            && self.len() == other.len()
    }

    /// Replaces values and validity, keeping the grid.
    pub fn with_data(&self, values: Vec<f64>, valid: Vec<bool>) -> Self {
        assert_eq!(values.len(), self.len());
        Self::new(self.channel, self.start, self.step_minutes, values, valid)
    }

    pub fn with_channel(mut self, channel: ChannelId) -> Self {
        self.channel = channel;
        self
    }

    /// Valid points as a raw series, one point at the start of each slot.
    pub fn to_raw(&self) -> RawSeries {
        let pts = self
            .valid_points()
            .map(|(t, v)| (t.to_seconds(), v))
            .collect();
        RawSeries::new(self.channel, pts)
    }

    /// Re-expresses a coarser grid on a 1-minute grid; slots between the
    /// native samples are invalid.
    pub fn to_minute_grid(&self) -> SampleSeries {
        if self.step_minutes == 1 {
            return self.clone();
        }
        let step = self.step_minutes as usize;
        let n = self.len() * step;
        let mut values = vec![f64::NAN; n];
        let mut valid = vec![false; n];
        for i in 0..self.len() {
            if self.valid[i] {
                values[i * step] = self.values[i];
                valid[i * step] = true;
            }
        }
        SampleSeries::new(self.channel, self.start, 1, values, valid)
    }
}

/// Bins raw points into `[minute, minute + 1)` cells starting at `origin` and
/// averages each cell; empty cells are invalid.
pub fn align_to_minute_grid(
    raw: &RawSeries,
    origin: Timestamp,
    length_minutes: usize,
) -> Result<SampleSeries> {
    let mut sums = vec![0.0; length_minutes];
    let mut counts = vec![0u32; length_minutes];
    let grid_end = origin.0 + length_minutes as i64;
    for &(secs, v) in raw.points() {
        let minute = Timestamp::from_seconds_floor(secs).0;
        if minute < origin.0 {
            return Err(Error::BeforeOrigin {
                minute,
                origin: origin.0,
            });
        }
        if minute >= grid_end {
            return Err(Error::GridOverflow { minute, grid_end });
        }
        let i = (minute - origin.0) as usize;
        sums[i] = if counts[i] == 0 { v } else { sums[i] + v };
        counts[i] += 1;
    }
    let valid: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
    let values = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
        .collect();
    Ok(SampleSeries::new(raw.channel, origin, 1, values, valid))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;

    use super::*;

    const T0: i64 = 1_614_556_800; // 2021-03-01T00:00:00Z

    #[test]
    fn bin_mean_of_two_points() {
        let raw = RawSeries::new(ChannelId::HeartRate, vec![(T0 + 10, 4.0), (T0 + 50, 6.0)]);
        let s = align_to_minute_grid(&raw, Timestamp(T0 / 60), 5).unwrap();
        assert_eq!(s.get(0), Some(5.0));
        assert_eq!(s.step_minutes, 1);
    }

    #[test]
    fn empty_minutes_are_invalid() {
        let raw = RawSeries::new(ChannelId::HeartRate, vec![(T0, 1.0), (T0 + 60 * 4, 2.0)]);
        let s = align_to_minute_grid(&raw, Timestamp(T0 / 60), 5).unwrap();
        assert!(!s.valid()[3]);
        assert!(s.values()[3].is_nan());
        assert_eq!(s.valid_count(), 2);
    }

    #[test]
    fn overflow_and_before_origin_are_errors() {
        let raw = RawSeries::new(ChannelId::HeartRate, vec![(T0 + 600, 1.0)]);
        assert!(matches!(
            align_to_minute_grid(&raw, Timestamp(T0 / 60), 5),
            Err(Error::GridOverflow { .. })
        ));
        assert!(matches!(
            align_to_minute_grid(&raw, Timestamp(T0 / 60 + 20), 5),
            Err(Error::BeforeOrigin { .. })
        ));
    }

    #[test]
    fn five_minute_samples_land_every_fifth_minute() {
        let pts: Vec<_> = (0..12).map(|i| (T0 + i * 300, 37.0)).collect();
        let raw = RawSeries::new(ChannelId::Cbt, pts);
        let s = align_to_minute_grid(&raw, Timestamp(T0 / 60), 60).unwrap();
        for i in 0..60 {
            assert_eq!(s.valid()[i], i % 5 == 0, "minute {i}");
        }
    }

    #[test]
    fn duplicate_timestamps_are_averaged_first() {
        let raw = RawSeries::new(
            ChannelId::LightLux,
            vec![(T0 + 5, 2.0), (T0 + 5, 4.0), (T0 + 1, 9.0)],
        );
        assert_eq!(raw.points(), &[(T0 + 1, 9.0), (T0 + 5, 3.0)]);
    }

    #[test]
    fn coarse_grid_expands_to_minutes() {
        let s = SampleSeries::new(
            ChannelId::Cbt,
            Timestamp(100),
            5,
            vec![1.0, 2.0, 3.0],
            vec![true, false, true],
        );
        let m = s.to_minute_grid();
        assert_eq!(m.len(), 15);
        assert_eq!(m.get(10), Some(3.0));
        assert_eq!(m.valid_count(), 2);
    }

    /// Independent groupby-mean over minute keys, after averaging exact-duplicate timestamps.
    fn groupby_oracle(points: &[(i64, f64)], origin: i64, len: usize) -> Vec<Option<f64>> {
        let mut dedup: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        for &(t, v) in points {
            dedup.entry(t).or_default().push(v);
        }
        let mut by_minute: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
        for (t, vs) in dedup {
            let mean = vs.iter().sum::<f64>() / vs.len() as f64;
            by_minute.entry(t.div_euclid(60)).or_default().push(mean);
        }
        (0..len as i64)
            .map(|i| {
                by_minute
                    .get(&(origin + i))
                    .map(|vs| vs.iter().sum::<f64>() / vs.len() as f64)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn alignment_matches_groupby_oracle(
            pts in prop::collection::vec((0i64..3600, -50.0f64..50.0), 1..200)
        ) {
            let points: Vec<(i64, f64)> = pts.iter().map(|&(s, v)| (T0 + s, v)).collect();
            let raw = RawSeries::new(ChannelId::HeartRate, points.clone());
            let origin = T0 / 60;
            let s = align_to_minute_grid(&raw, Timestamp(origin), 60).unwrap();
            let oracle = groupby_oracle(&points, origin, 60);
            for (i, o) in oracle.iter().enumerate() {
                match o {
                    Some(v) => prop_assert!((s.get(i).unwrap() - v).abs() < 1e-9),
                    None => prop_assert!(!s.valid()[i]),
                }
            }
        }

        #[test]
        fn alignment_is_idempotent(
            vals in prop::collection::vec(prop::option::of(-1e3f64..1e3), 1..300)
        ) {
            let valid: Vec<bool> = vals.iter().map(|v| v.is_some()).collect();
            prop_assume!(valid.iter().any(|&v| v));
            let values: Vec<f64> = vals.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
            let s = SampleSeries::new(ChannelId::SkinTemp, Timestamp(T0 / 60), 1, values, valid);
            let again = align_to_minute_grid(&s.to_raw(), s.start, s.len()).unwrap();
            prop_assert_eq!(again.valid(), s.valid());
            for (a, b) in again.values().iter().zip(s.values()) {
                prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            }
        }
    }
}
