//! Per-participant cleaning and normalization.
//!
//! Stage order for every wearable channel: IQR outlier removal, short-gap
//! linear interpolation, `log10(lux + offset)` for light only, then z-scoring
//! with the participant's own statistics. `acc_net` is derived from the
//! cleaned axes before z-scoring. CBT is cleaned and interpolated but stays in
//! °C because the cosinor is fitted on it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data_model::{ChannelId, ParticipantRecording, SampleSeries};
use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub iqr_multiplier: f64,
    pub max_interp_gap_minutes: usize,
    pub light_log_offset: f64,
    pub zscore_epsilon: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            iqr_multiplier: 3.0,
            max_interp_gap_minutes: 5,
            light_log_offset: 1.0,
            zscore_epsilon: 1e-9,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.iqr_multiplier > 0.0
            && self.max_interp_gap_minutes > 0
            && self.light_log_offset > 0.0
            && self.zscore_epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(
                "preprocess parameters must all be positive".into(),
            ))
        }
    }
}

/// Statistics used to z-score one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub sd: f64,
    /// The channel was (near-)constant and was replaced by zeros.
    pub degenerate: bool,
}

/// Quantile of sorted data by linear interpolation between order statistics
/// (`h = (n − 1)·p`).
pub fn quantile_sorted<T: Real>(sorted: &[T], p: T) -> T {
    assert!(!sorted.is_empty());
    let h = T::from_count(sorted.len() - 1) * p;
    let lo = h.floor();
    let i = lo.to_usize().unwrap_or(0);
    if i + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    sorted[i] + (h - lo) * (sorted[i + 1] - sorted[i])
}

/// `[Q1 − k·IQR, Q3 + k·IQR]` of the given values.
pub fn iqr_fence<T: Real>(values: &[T], k: T) -> (T, T) {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let q1 = quantile_sorted(&sorted, T::lit(0.25));
    let q3 = quantile_sorted(&sorted, T::lit(0.75));
    let iqr = q3 - q1;
    (q1 - k * iqr, q3 + k * iqr)
}

/// Sample mean and standard deviation (n − 1).
pub fn mean_sd<T: Real>(values: &[T]) -> (T, T) {
    let n = T::from_count(values.len());
    let mean = values.iter().copied().sum::<T>() / n;
    let ss: T = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - T::one())).sqrt())
}

pub fn remove_outliers_iqr(s: &SampleSeries, k: f64) -> Result<SampleSeries> {
    let vals: Vec<f64> = s.valid_values().collect();
    if vals.len() < 4 {
        return Err(Error::TooFewSamples {
            needed: 4,
            have: vals.len(),
        });
    }
    let (lo, hi) = iqr_fence(&vals, k);
    let valid: Vec<bool> = s
        .values()
        .iter()
        .zip(s.valid())
        .map(|(&v, &ok)| ok && v >= lo && v <= hi)
        .collect();
    Ok(s.with_data(s.values().to_vec(), valid))
}

/// Fills interior invalid runs of at most `max_gap` minutes by linear
/// interpolation between the flanking valid samples. Leading and trailing
/// runs are never filled.
pub fn interpolate_short_gaps(s: &SampleSeries, max_gap: usize) -> SampleSeries {
    let mut values = s.values().to_vec();
    let mut valid = s.valid().to_vec();
    let mut last_valid: Option<usize> = None;
    for i in 0..s.len() {
        if !s.valid()[i] {
            continue;
        }
        if let Some(a) = last_valid {
            let gap = i - a - 1;
            if gap > 0 && gap <= max_gap {
                let (va, vb) = (s.values()[a], s.values()[i]);
                let span = (i - a) as f64;
                for j in a + 1..i {
                    values[j] = va + (vb - va) * (j - a) as f64 / span;
                    valid[j] = true;
                }
            }
        }
        last_valid = Some(i);
    }
    s.with_data(values, valid)
}

/// `max(√(ax² + ay² + az²) − 1, 0)`, in g, valid where all three axes are.
pub fn compute_acc_net(
    ax: &SampleSeries,
    ay: &SampleSeries,
    az: &SampleSeries,
) -> Result<SampleSeries> {
    if !ax.same_grid(ay) || !ax.same_grid(az) {
        return Err(Error::GridMismatch(
            "accelerometer axes are on different grids".into(),
        ));
    }
    let n = ax.len();
    let mut values = vec![f64::NAN; n];
    let mut valid = vec![false; n];
    for i in 0..n {
        if let (Some(x), Some(y), Some(z)) = (ax.get(i), ay.get(i), az.get(i)) {
            values[i] = ((x * x + y * y + z * z).sqrt() - 1.0).max(0.0);
            valid[i] = true;
        }
    }
    Ok(SampleSeries::new(
        ChannelId::AccNet,
        ax.start,
        ax.step_minutes,
        values,
        valid,
    ))
}

pub fn log_transform_light(s: &SampleSeries, offset: f64) -> Result<SampleSeries> {
    if let Some(neg) = s.valid_values().find(|&v| v < 0.0) {
        return Err(Error::NegativeLux(neg));
    }
    let values = s.values().iter().map(|&v| (v + offset).log10()).collect();
    Ok(s.with_data(values, s.valid().to_vec()))
}

/// Z-scores the valid samples. A channel whose standard deviation falls below
/// `epsilon` becomes all zeros and is flagged degenerate.
pub fn zscore_participant(s: &SampleSeries, epsilon: f64) -> Result<(SampleSeries, NormStats)> {
    let vals: Vec<f64> = s.valid_values().collect();
    if vals.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            have: vals.len(),
        });
    }
    let (mean, sd) = mean_sd(&vals);
    let degenerate = !(sd >= epsilon);
    if degenerate {
        log::warn!(
            "{}: degenerate channel (sd {sd:e}); replaced by zeros",
            s.channel
        );
    }
    let values = s
        .values()
        .iter()
        .map(|&v| if degenerate { 0.0 } else { (v - mean) / sd })
        .collect();
    Ok((
        s.with_data(values, s.valid().to_vec()),
        NormStats {
            mean,
            sd,
            degenerate,
        },
    ))
}

fn clean(s: &SampleSeries, cfg: &PreprocessConfig) -> Result<SampleSeries> {
    let s = remove_outliers_iqr(s, cfg.iqr_multiplier)?;
    Ok(interpolate_short_gaps(&s, cfg.max_interp_gap_minutes))
}

pub fn preprocess_recording(
    r: &ParticipantRecording,
    cfg: &PreprocessConfig,
) -> Result<(ParticipantRecording, BTreeMap<ChannelId, NormStats>)> {
    let mut cleaned: BTreeMap<ChannelId, SampleSeries> = BTreeMap::new();
    for (&ch, s) in r.channels.iter().filter(|(c, _)| !c.is_derived()) {
        cleaned.insert(ch, clean(s, cfg)?);
    }
    if let (Some(x), Some(y), Some(z)) = (
        cleaned.get(&ChannelId::AccX),
        cleaned.get(&ChannelId::AccY),
        cleaned.get(&ChannelId::AccZ),
    ) {
        let net = compute_acc_net(x, y, z)?;
        cleaned.insert(ChannelId::AccNet, net);
    }
    if let Some(light) = cleaned.get_mut(&ChannelId::LightLux) {
        *light = log_transform_light(light, cfg.light_log_offset)?;
    }

    let mut channels = BTreeMap::new();
    let mut stats = BTreeMap::new();
    for (ch, s) in cleaned {
        let (z, st) = zscore_participant(&s, cfg.zscore_epsilon)?;
        channels.insert(ch, z);
        stats.insert(ch, st);
    }

    let mut out = ParticipantRecording {
        participant_id: r.participant_id.clone(),
        channels,
        cbt: clean(&r.cbt, cfg)?,
        cbt_coverage: Vec::new(),
    };
    out.refresh_coverage();
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    use super::*;
    use crate::data_model::{assemble_recording, Timestamp};

    fn series(vals: &[Option<f64>]) -> SampleSeries {
        let valid: Vec<bool> = vals.iter().map(|v| v.is_some()).collect();
        let values = vals.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        SampleSeries::new(ChannelId::HeartRate, Timestamp(1000), 1, values, valid)
    }

    fn some(vals: &[f64]) -> Vec<Option<f64>> {
        vals.iter().map(|&v| Some(v)).collect()
    }

    /// Brute-force fence: the order statistics are found by selection rather
    /// than a sort of the whole slice.
    fn brute_fence(vals: &[f64], k: f64) -> (f64, f64) {
        let kth = |r: usize| {
            *vals
                .iter()
                .find(|&&v| {
                    let below = vals.iter().filter(|&&w| w < v).count();
                    let at = vals.iter().filter(|&&w| w == v).count();
                    below <= r && r < below + at
                })
                .unwrap()
        };
        let q = |p: f64| {
            let h = (vals.len() - 1) as f64 * p;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            kth(lo) + (h - h.floor()) * (kth(hi) - kth(lo))
        };
        let (q1, q3) = (q(0.25), q(0.75));
        (q1 - k * (q3 - q1), q3 + k * (q3 - q1))
    }

    #[test]
    fn iqr_removes_extreme_point() {
        let mut v: Vec<f64> = (1..=9).map(|x| x as f64).collect();
        v.push(1000.0);
        let (lo, hi) = brute_fence(&v, 1.5);
        assert!(1000.0 > hi && 1.0 >= lo && 9.0 <= hi);
        let out = remove_outliers_iqr(&series(&some(&v)), 1.5).unwrap();
        assert_eq!(out.valid_count(), 9);
        assert!(!out.valid()[9]);
    }

    #[test]
    fn iqr_keeps_constant_and_ramp() {
        let out = remove_outliers_iqr(&series(&some(&[4.0; 8])), 3.0).unwrap();
        assert_eq!(out.valid_count(), 8);
        let ramp: Vec<f64> = (1..=100).map(|x| x as f64).collect();
        let (lo, hi) = brute_fence(&ramp, 3.0);
        assert!(lo < 1.0 && hi > 100.0);
        let out = remove_outliers_iqr(&series(&some(&ramp)), 3.0).unwrap();
        assert_eq!(out.valid_count(), 100);
        assert!(matches!(
            remove_outliers_iqr(&series(&some(&[1.0, 2.0, 3.0])), 3.0),
            Err(Error::TooFewSamples { needed: 4, have: 3 })
        ));
    }

    #[test]
    fn interpolation_rules() {
        let s = series(&[Some(10.0), None, None, Some(16.0)]);
        let out = interpolate_short_gaps(&s, 5);
        assert_eq!(out.values(), &[10.0, 12.0, 14.0, 16.0]);
        assert!(out.valid().iter().all(|&v| v));

        let mut long = vec![Some(1.0)];
        long.extend(std::iter::repeat_n(None, 6));
        long.push(Some(2.0));
        let out = interpolate_short_gaps(&series(&long), 5);
        assert_eq!(out.valid_count(), 2);

        let lead = series(&[None, None, None, Some(1.0), Some(2.0)]);
        assert_eq!(interpolate_short_gaps(&lead, 5).valid_count(), 2);

        let empty = series(&[None, None]);
        assert_eq!(interpolate_short_gaps(&empty, 5).valid(), empty.valid());
    }

    #[test]
    fn acc_net_examples() {
        let mk = |v: f64| SampleSeries::from_values(ChannelId::AccX, Timestamp(0), vec![v, v]);
        let net = |x, y, z| compute_acc_net(&mk(x), &mk(y), &mk(z)).unwrap().values()[0];
        assert_eq!(net(1.0, 0.0, 0.0), 0.0);
        assert_eq!(net(3.0, 4.0, 0.0), 4.0);
        assert_eq!(net(0.0, 0.0, 0.0), 0.0);
        let other = SampleSeries::from_values(ChannelId::AccY, Timestamp(5), vec![0.0, 0.0]);
        assert!(matches!(
            compute_acc_net(&mk(1.0), &other, &mk(1.0)),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn light_log_examples() {
        let s =
            SampleSeries::from_values(ChannelId::LightLux, Timestamp(0), vec![0.0, 999.0, 9999.0]);
        let out = log_transform_light(&s, 1.0).unwrap();
        assert_eq!(out.values(), &[0.0, 3.0, 4.0]);
        let neg = SampleSeries::from_values(ChannelId::LightLux, Timestamp(0), vec![-1.0]);
        assert!(matches!(
            log_transform_light(&neg, 1.0),
            Err(Error::NegativeLux(_))
        ));
    }

    #[test]
    fn zscore_examples() {
        let (z, st) = zscore_participant(&series(&some(&[1.0, 3.0])), 1e-9).unwrap();
        assert!((st.sd - 2f64.sqrt()).abs() < 1e-15);
        assert!((z.values()[0] + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((z.values()[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        let (z, st) = zscore_participant(&series(&some(&[5.0; 10])), 1e-9).unwrap();
        assert!(st.degenerate);
        assert!(z.values().iter().all(|&v| v == 0.0));

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = Normal::new(12.0, 3.0).unwrap();
        let v: Vec<f64> = (0..5000).map(|_| g.sample(&mut rng)).collect();
        let (z, _) = zscore_participant(&series(&some(&v)), 1e-9).unwrap();
        let (m, sd) = mean_sd(z.values());
        assert!(m.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stage_order_is_outliers_then_interpolation() {
        // a spike beside a short gap: cleaning first widens the gap and then
        // fills it from sane anchors
        let mut v: Vec<Option<f64>> = (0..20).map(|i| Some(i as f64)).collect();
        v[10] = Some(500.0);
        v[11] = None;
        v[12] = None;
        let s = series(&v);
        let cfg = PreprocessConfig::default();
        let ours = clean(&s, &cfg).unwrap();
        let reversed = remove_outliers_iqr(&interpolate_short_gaps(&s, 5), 3.0).unwrap();
        assert_eq!(&ours.values()[9..14], &[9.0, 10.0, 11.0, 12.0, 13.0]);
        assert_eq!(ours.valid_count(), 20);
        assert_ne!(ours.valid(), reversed.valid());
    }

    #[test]
    fn recording_pipeline_keeps_grid_and_cbt_units() {
        let n = 3 * 1440;
        let start = Timestamp(26_909_280);
        let wave = |i: usize, a: f64, off: f64| {
            off + a * (i as f64 * std::f64::consts::TAU / 1440.0).cos()
        };
        let light = SampleSeries::from_values(
            ChannelId::LightLux,
            start,
            (0..n).map(|i| wave(i, 400.0, 400.0)).collect(),
        );
        let mut lux_valid = vec![true; n];
        lux_valid[2000..2010].iter_mut().for_each(|v| *v = false);
        let light = light.with_data(light.values().to_vec(), lux_valid);
        let ax = SampleSeries::from_values(
            ChannelId::AccX,
            start,
            (0..n).map(|i| 1.0 + 0.1 * ((i % 7) as f64)).collect(),
        );
        let ay = SampleSeries::from_values(ChannelId::AccY, start, vec![0.0; n]);
        let az = SampleSeries::from_values(ChannelId::AccZ, start, vec![0.0; n]);
        let cbt_valid: Vec<bool> = (0..n).map(|i| i % 5 == 0).collect();
        let cbt = SampleSeries::new(
            ChannelId::Cbt,
            start,
            1,
            (0..n).map(|i| wave(i, 0.4, 37.0)).collect(),
            cbt_valid,
        );
        let rec = assemble_recording("p", vec![light, ax, ay, az], cbt.clone()).unwrap();
        let (out, stats) = preprocess_recording(&rec, &PreprocessConfig::default()).unwrap();

        assert!(out.channels.contains_key(&ChannelId::AccNet));
        assert!(stats.contains_key(&ChannelId::AccNet));
        for s in out.channels.values() {
            assert!(s.same_grid(&rec.cbt));
        }
        // the ten-minute light gap is longer than the interpolation limit
        assert!(out.channels[&ChannelId::LightLux].valid()[2000..2010]
            .iter()
            .all(|&v| !v));
        // CBT keeps its native samples and gains linear fills between them
        for i in (0..n - 5).step_by(5) {
            assert_eq!(out.cbt.values()[i], cbt.values()[i]);
            assert!(out.cbt.valid()[i + 1]);
        }
        assert_eq!(out.cbt_coverage.len(), 1);
        assert!(stats[&ChannelId::AccY].degenerate);
        for s in out
            .channels
            .values()
            .filter(|s| !stats[&s.channel].degenerate)
        {
            let v: Vec<f64> = s.valid_values().collect();
            let (m, sd) = mean_sd(&v);
            assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9, "{}", s.channel);
        }
    }

    proptest! {
        #[test]
        fn fence_matches_brute_force(v in prop::collection::vec(-100.0f64..100.0, 4..60), k in 0.5f64..4.0) {
            let (a, b) = iqr_fence(&v, k);
            let (c, d) = brute_fence(&v, k);
            prop_assert!((a - c).abs() < 1e-9 && (b - d).abs() < 1e-9);
        }

        #[test]
        fn pipeline_stages_preserve_grid(v in prop::collection::vec(prop::option::of(0.0f64..50.0), 4..80)) {
            prop_assume!(v.iter().filter(|x| x.is_some()).count() >= 4);
            let s = series(&v);
            let out = clean(&s, &PreprocessConfig::default()).unwrap();
            prop_assert!(out.same_grid(&s));
        }
    }
}
