//! Synthetic free-living participants with a planted circadian phase.
//!
//! Every participant has an acrophase `φ` drawn uniformly from
//! `acrophase_range`; the true phase at minute `t` is `(ωt + φ) mod 2π`. The
//! sleep/wake schedule is shifted with `φ` so that behavior carries phase
//! information, while clock-fixed daylight acts as the external cue.
//!
//! Channel models, per minute `t` with `c(t) = cos(ωt + φ)`:
//!
//! * light: while awake, `daylight(t)·x(t) + 100` lux, where daylight is a
//!   half-sine from 08:00 to 20:00 UTC peaking at 10,000 lux and `x(t)` is an
//!   AR(1) outdoor-exposure factor; 0 lux while asleep; multiplied by
//!   log-normal noise.
//! * motion_counts: an activity level while awake, near zero while asleep,
//!   plus Gaussian noise, clamped at zero.
//! * acc_x/y/z: posture gravity vector scaled by `1 + 0.002·counts`, plus noise.
//! * heart_rate: `65 + 5·c(t) + 0.04·counts + noise`.
//! * skin_temp: `33 − 0.5·c(t) + masking·1.5·m(t) + noise`, where `m(t)` is a
//!   slow unit-variance AR(1) process (4 h time constant).
//! * cbt: `M + A·c(t) + masking·0.0006·ema30(counts) + noise`, valid every
//!   5 minutes over the final `cbt_days` days.
//!
//! Random streams are ChaCha8 generators seeded per `(seed, participant,
//! stream)` through [`crate::seed::derive_seed`], so any participant can be
//! regenerated alone.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::circular::wrap_phase;
use crate::cosinor::omega;
use crate::data_model::{
    assemble_recording, format_utc, parse_utc, ChannelId, ParticipantRecording, SampleSeries,
    Timestamp, MINUTES_PER_DAY,
};
use crate::error::{Error, Result};
use crate::seed::job_rng;

/// Acrophase whose CBT peak falls at 17:00 UTC; schedules are defined
/// relative to it.
pub const REFERENCE_ACROPHASE: f64 = TAU * 7.0 / 24.0;

const DAY: i64 = MINUTES_PER_DAY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub n_participants: usize,
    pub days: usize,
    /// Midnight-aligned first minute of every recording.
    pub start_utc: String,
    pub acrophase_range: [f64; 2],
    pub cbt_mesor: f64,
    pub cbt_amplitude: f64,
    /// Noise scale per channel; channels absent from the map are noiseless.
    /// For light the value is the log-scale standard deviation.
    pub noise_sd: BTreeMap<ChannelId, f64>,
    pub masking_strength: f64,
    /// Schedule of a participant at [`REFERENCE_ACROPHASE`], in clock hours.
    pub wake_hour: f64,
    pub sleep_onset_hour: f64,
    pub schedule_jitter_hours: f64,
    pub gap_rate_per_day: f64,
    pub outlier_rate: f64,
    pub cbt_days: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        use ChannelId::*;
        let noise_sd = [
            (LightLux, 0.5),
            (MotionCounts, 60.0),
            (AccX, 0.01),
            (AccY, 0.01),
            (AccZ, 0.01),
            (HeartRate, 3.0),
            (SkinTemp, 0.2),
            (Cbt, 0.05),
        ]
        .into_iter()
        .collect();
        Self {
            n_participants: 14,
            days: 20,
            start_utc: "2021-03-01T00:00:00Z".into(),
            acrophase_range: [TAU * 5.5 / 24.0, TAU * 8.5 / 24.0],
            cbt_mesor: 37.0,
            cbt_amplitude: 0.4,
            noise_sd,
            masking_strength: 1.0,
            wake_hour: 7.0,
            sleep_onset_hour: 23.0,
            schedule_jitter_hours: 0.5,
            gap_rate_per_day: 0.5,
            outlier_rate: 0.001,
            cbt_days: 3,
            seed: 0,
        }
    }
}

impl SynthParams {
    /// No noise, masking, jitter, gaps or outliers, and a single acrophase.
    pub fn noiseless() -> Self {
        Self {
            acrophase_range: [REFERENCE_ACROPHASE; 2],
            noise_sd: BTreeMap::new(),
            masking_strength: 0.0,
            schedule_jitter_hours: 0.0,
            gap_rate_per_day: 0.0,
            outlier_rate: 0.0,
            ..Self::default()
        }
    }

    pub fn noise(&self, ch: ChannelId) -> f64 {
        self.noise_sd.get(&ch).copied().unwrap_or(0.0)
    }

    pub fn start(&self) -> Result<Timestamp> {
        let secs = parse_utc(&self.start_utc)?;
        let t = Timestamp::from_seconds_floor(secs);
        if t.to_seconds() != secs || t.minute_of_day() != 0 {
            return Err(Error::InvalidParams(format!(
                "start_utc {} is not midnight",
                self.start_utc
            )));
        }
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.n_participants == 0 {
            return bad("n_participants must be positive".into());
        }
        if self.days < 4 {
            return bad(format!("days = {} < 4", self.days));
        }
        if self.cbt_days == 0 || self.cbt_days >= self.days {
            return bad(format!("cbt_days must lie in 1..{}", self.days));
        }
        let [lo, hi] = self.acrophase_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("acrophase_range [{lo}, {hi}] is empty"));
        }
        if let Some((ch, sd)) = self
            .noise_sd
            .iter()
            .find(|(_, sd)| !(sd.is_finite() && **sd >= 0.0))
        {
            return bad(format!(
                "noise_sd[{ch}] = {sd} must be finite and non-negative"
            ));
        }
        if self.noise_sd.contains_key(&ChannelId::AccNet) {
            return bad("acc_net is derived and takes no noise".into());
        }
        for (name, v) in [
            ("cbt_mesor", self.cbt_mesor),
            ("cbt_amplitude", self.cbt_amplitude),
            ("masking_strength", self.masking_strength),
            ("schedule_jitter_hours", self.schedule_jitter_hours),
            ("gap_rate_per_day", self.gap_rate_per_day),
            ("outlier_rate", self.outlier_rate),
        ] {
            if !v.is_finite() || (name != "cbt_mesor" && v < 0.0) {
                return bad(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if self.outlier_rate > 1.0 {
            return bad("outlier_rate must be at most 1".into());
        }
        if !(0.0..24.0).contains(&self.wake_hour)
            || !(self.wake_hour < self.sleep_onset_hour && self.sleep_onset_hour < 24.0)
        {
            return bad("need 0 <= wake_hour < sleep_onset_hour < 24".into());
        }
        self.start()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub participant_id: String,
    pub true_acrophase: f64,
}

impl SynthTruth {
    pub fn phase_at(&self, t: Timestamp) -> f64 {
        wrap_phase(crate::cosinor::clock_angle::<f64>(t) + self.true_acrophase)
    }

    /// `timestamp_utc,phase_radians` for `len` minutes from `start`.
    pub fn to_csv(&self, start: Timestamp, len: usize) -> String {
        let mut out = String::from("timestamp_utc,phase_radians\n");
        for i in 0..len as i64 {
            let t = start.offset(i);
            let _ = writeln!(out, "{},{}", format_utc(t.to_seconds()), self.phase_at(t));
        }
        out
    }
}

pub fn participant_id(index: usize) -> String {
    format!("p{:02}", index + 1)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Unit-variance AR(1) with time constant `tau` minutes.
fn ar1(rng: &mut ChaCha8Rng, n: usize, tau: f64) -> Vec<f64> {
    let a = (-1.0 / tau).exp();
    let b = (1.0 - a * a).sqrt();
    let mut z = normal(rng);
    (0..n)
        .map(|_| {
            let v = z;
            z = a * z + b * normal(rng);
            v
        })
        .collect()
}

/// Awake mask from a daily wake/sleep schedule shifted by `shift` minutes.
fn awake_mask(p: &SynthParams, n: usize, shift: f64, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut awake = vec![false; n];
    let jitter = p.schedule_jitter_hours * 60.0;
    for d in -1..=(n as i64 / DAY) {
        let base = (d * DAY) as f64 + shift;
        let wake = base + p.wake_hour * 60.0 + jitter * normal(rng);
        let sleep = base + p.sleep_onset_hour * 60.0 + jitter * normal(rng);
        let (lo, hi) = (
            wake.round().max(0.0) as i64,
            sleep.round().min(n as f64) as i64,
        );
        for m in lo.max(0)..hi.max(0) {
            awake[m as usize] = true;
        }
    }
    awake
}

fn daylight(minute_of_day: i64) -> f64 {
    let h = minute_of_day as f64 / 60.0;
    if (8.0..=20.0).contains(&h) {
        10_000.0 * (PI * (h - 8.0) / 12.0).sin()
    } else {
        0.0
    }
}

/// Invalidates the device channels over random wear gaps of 10 to 90 minutes.
fn wear_mask(p: &SynthParams, n: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut worn = vec![true; n];
    let rate = p.gap_rate_per_day * p.days as f64;
    if rate > 0.0 {
        let count = Poisson::new(rate).expect("positive rate").sample(rng) as usize;
        for _ in 0..count {
            let start = rng.random_range(0..n);
            let len = rng.random_range(10..=90);
            for w in worn.iter_mut().skip(start).take(len) {
                *w = false;
            }
        }
    }
    worn
}

/// Generates participant `index` of the cohort described by `p`.
pub fn generate_participant(
    p: &SynthParams,
    index: usize,
) -> Result<(ParticipantRecording, SynthTruth)> {
    p.validate()?;
    if index >= p.n_participants {
        return Err(Error::InvalidParams(format!(
            "index {index} >= n_participants {}",
            p.n_participants
        )));
    }
    let pid = participant_id(index);
    let rng = |stream: &str| job_rng(p.seed, &format!("synth/{pid}/{stream}"));
    let start = p.start()?;
    let n = p.days * DAY as usize;
    let w = omega::<f64>();

    let [lo, hi] = p.acrophase_range;
    let acro = lo + (hi - lo) * rng("acrophase").random::<f64>();
    let truth = SynthTruth {
        participant_id: pid.clone(),
        true_acrophase: acro,
    };
    let shift = -(acro - REFERENCE_ACROPHASE) / w;
    let awake = awake_mask(p, n, shift, &mut rng("schedule"));
    let worn = wear_mask(p, n, &mut rng("gaps"));
    let clock: Vec<f64> = (0..n as i64)
        .map(|i| (crate::cosinor::clock_angle::<f64>(start.offset(i)) + acro).cos())
        .collect();

    let sd_light = p.noise(ChannelId::LightLux);
    let mut r = rng("light");
    let exposure = ar1(&mut r, n, 60.0);
    let light: Vec<f64> = (0..n)
        .map(|i| {
            if !awake[i] {
                return 0.0;
            }
            let outdoor = (0.05 * (1.5 * sd_light * exposure[i]).exp()).min(1.0);
            let lux = daylight(i as i64 % DAY) * outdoor + 100.0;
            (lux * (sd_light * normal(&mut r)).exp()).max(0.0)
        })
        .collect();

    let sd_counts = p.noise(ChannelId::MotionCounts);
    let mut r = rng("motion");
    let bouts = ar1(&mut r, n, 20.0);
    let counts: Vec<f64> = (0..n)
        .map(|i| {
            let level = if awake[i] {
                250.0 + 0.8 * sd_counts * bouts[i]
            } else {
                5.0
            };
            let noise = if awake[i] { sd_counts } else { 0.1 * sd_counts };
            (level + noise * normal(&mut r)).max(0.0)
        })
        .collect();

    let acc: Vec<Vec<f64>> = [ChannelId::AccX, ChannelId::AccY, ChannelId::AccZ]
        .into_iter()
        .enumerate()
        .map(|(axis, ch)| {
            let sd = p.noise(ch);
            let mut r = rng(ch.name());
            (0..n)
                .map(|i| {
                    // upright while awake, lying on the side while asleep
                    let g = match (awake[i], axis) {
                        (true, 2) | (false, 0) => 1.0,
                        _ => 0.0,
                    };
                    g * (1.0 + 0.002 * counts[i]) + sd * normal(&mut r)
                })
                .collect()
        })
        .collect();

    let sd_hr = p.noise(ChannelId::HeartRate);
    let mut r = rng("heart_rate");
    let mut heart_rate: Vec<f64> = (0..n)
        .map(|i| 65.0 + 5.0 * clock[i] + 0.04 * counts[i] + sd_hr * normal(&mut r))
        .collect();

    let sd_skin = p.noise(ChannelId::SkinTemp);
    let mut r = rng("skin_temp");
    let masking = ar1(&mut r, n, 240.0);
    let mut skin_temp: Vec<f64> = (0..n)
        .map(|i| {
            33.0 - 0.5 * clock[i] + p.masking_strength * 1.5 * masking[i] + sd_skin * normal(&mut r)
        })
        .collect();

    let mut r = rng("outliers");
    if p.outlier_rate > 0.0 {
        for i in 0..n {
            if r.random::<f64>() < p.outlier_rate {
                heart_rate[i] += r.random_range(60.0..100.0);
            }
            if r.random::<f64>() < p.outlier_rate {
                skin_temp[i] -= r.random_range(6.0..10.0);
            }
        }
    }

    let sd_cbt = p.noise(ChannelId::Cbt);
    let mut r = rng("cbt");
    let cbt_from = n - p.cbt_days * DAY as usize;
    let alpha = 1.0 - (-1.0f64 / 30.0).exp();
    let mut ema = counts[0];
    let mut cbt_values = vec![f64::NAN; n];
    let mut cbt_valid = vec![false; n];
    for i in 0..n {
        ema += alpha * (counts[i] - ema);
        if i >= cbt_from && i % 5 == 0 {
            cbt_values[i] = p.cbt_mesor
                + p.cbt_amplitude * clock[i]
                + p.masking_strength * 0.0006 * ema
                + sd_cbt * normal(&mut r);
            cbt_valid[i] = true;
        }
    }

    let series =
        |ch: ChannelId, values: Vec<f64>| SampleSeries::new(ch, start, 1, values, worn.clone());
    let [ax, ay, az]: [Vec<f64>; 3] = acc.try_into().expect("three axes");
    let channels = vec![
        series(ChannelId::LightLux, light),
        series(ChannelId::MotionCounts, counts),
        series(ChannelId::AccX, ax),
        series(ChannelId::AccY, ay),
        series(ChannelId::AccZ, az),
        series(ChannelId::HeartRate, heart_rate),
        series(ChannelId::SkinTemp, skin_temp),
    ];
    let cbt = SampleSeries::new(ChannelId::Cbt, start, 1, cbt_values, cbt_valid);
    Ok((assemble_recording(&pid, channels, cbt)?, truth))
}

pub fn generate_cohort(p: &SynthParams) -> Result<Vec<(ParticipantRecording, SynthTruth)>> {
    use rayon::prelude::*;
    p.validate()?;
    (0..p.n_participants)
        .into_par_iter()
        .map(|i| generate_participant(p, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circular::wrapped_error;
    use crate::cosinor::{fit_per_segment, fit_series, DEFAULT_MIN_SPAN_MINUTES};

    fn small(days: usize) -> SynthParams {
        SynthParams {
            n_participants: 3,
            days,
            ..SynthParams::default()
        }
    }

    #[test]
    fn noiseless_cbt_is_exact_cosine() {
        let p = SynthParams {
            days: 5,
            ..SynthParams::noiseless()
        };
        let (rec, truth) = generate_participant(&p, 0).unwrap();
        assert_eq!(truth.true_acrophase, REFERENCE_ACROPHASE);
        let mut count = 0;
        for (t, v) in rec.cbt.valid_points() {
            let expect =
                37.0 + 0.4 * (crate::cosinor::clock_angle::<f64>(t) + truth.true_acrophase).cos();
            assert_eq!(v, expect);
            count += 1;
        }
        assert_eq!(count, 3 * 288);
        assert_eq!(rec.cbt_coverage.len(), 1);
        assert_eq!(rec.cbt_coverage[0].span_minutes(), 3 * 1440 - 5);
    }

    #[test]
    fn noiseless_fits_recover_planted_phase() {
        let p = SynthParams {
            days: 5,
            acrophase_range: [0.3, 5.9],
            n_participants: 4,
            ..SynthParams::noiseless()
        };
        for i in 0..4 {
            let (rec, truth) = generate_participant(&p, i).unwrap();
            let fit = fit_series(&rec.cbt, DEFAULT_MIN_SPAN_MINUTES).unwrap();
            assert!(wrapped_error(fit.acrophase, truth.true_acrophase).abs() < 1e-9);
            // skin temperature carries the same rhythm, inverted
            let skin = &rec.channels[&ChannelId::SkinTemp];
            let sfit = fit_series(skin, DEFAULT_MIN_SPAN_MINUTES).unwrap();
            assert!(
                wrapped_error(sfit.acrophase, wrap_phase(truth.true_acrophase + PI)).abs() < 1e-9
            );
        }
    }

    #[test]
    fn deterministic_per_seed_and_index() {
        let p = small(5);
        let a = generate_participant(&p, 1).unwrap();
        let b = generate_participant(&p, 1).unwrap();
        for (ch, s) in &a.0.channels {
            let bits =
                |s: &SampleSeries| s.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(s), bits(&b.0.channels[ch]));
        }
        assert_eq!(a.1, b.1);
        let cohort = generate_cohort(&p).unwrap();
        assert_eq!(cohort[1].1, a.1);
        let other = generate_participant(
            &SynthParams {
                seed: 1,
                ..small(5)
            },
            1,
        )
        .unwrap();
        assert_ne!(other.1.true_acrophase, a.1.true_acrophase);
    }

    #[test]
    fn cohort_ids_and_ranges() {
        let p = SynthParams {
            n_participants: 14,
            days: 4,
            ..SynthParams::default()
        };
        let cohort = generate_cohort(&p).unwrap();
        let ids: std::collections::BTreeSet<_> =
            cohort.iter().map(|c| c.0.participant_id.clone()).collect();
        assert_eq!(ids.len(), 14);
        let [lo, hi] = p.acrophase_range;
        assert!(cohort
            .iter()
            .all(|c| c.1.true_acrophase >= lo && c.1.true_acrophase <= hi));
        let fixed = SynthParams {
            n_participants: 5,
            days: 4,
            acrophase_range: [1.25, 1.25],
            ..SynthParams::default()
        };
        assert!(generate_cohort(&fixed)
            .unwrap()
            .iter()
            .all(|c| c.1.true_acrophase == 1.25));
    }

    #[test]
    fn physical_ranges_hold() {
        let (rec, _) = generate_participant(&small(6), 2).unwrap();
        assert!(rec.channels[&ChannelId::LightLux]
            .valid_values()
            .all(|v| v >= 0.0));
        assert!(rec.channels[&ChannelId::MotionCounts]
            .valid_values()
            .all(|v| v >= 0.0));
        assert_eq!(rec.len(), 6 * 1440);
        assert!(!rec.channels.contains_key(&ChannelId::AccNet));
        let light = &rec.channels[&ChannelId::LightLux];
        assert!(light.valid_count() < light.len(), "expected some wear gaps");
    }

    #[test]
    fn default_cohort_reference_tracks_truth() {
        let (rec, truth) = generate_participant(&small(20), 0).unwrap();
        let reference = fit_per_segment(&rec.cbt, &rec.cbt_coverage, DEFAULT_MIN_SPAN_MINUTES);
        let seg = &reference.segments[0];
        // activity masking biases the fit, but only slightly
        assert!(wrapped_error(seg.fit.acrophase, truth.true_acrophase).abs() < 0.3);
    }

    #[test]
    fn invalid_params_rejected() {
        let cases = [
            SynthParams {
                days: 3,
                ..SynthParams::default()
            },
            SynthParams {
                acrophase_range: [2.0, 1.0],
                ..SynthParams::default()
            },
            SynthParams {
                masking_strength: -1.0,
                ..SynthParams::default()
            },
            SynthParams {
                start_utc: "2021-03-01T00:30:00Z".into(),
                ..SynthParams::default()
            },
            SynthParams {
                noise_sd: [(ChannelId::HeartRate, -0.1)].into_iter().collect(),
                ..SynthParams::default()
            },
        ];
        for p in cases {
            assert!(
                matches!(generate_participant(&p, 0), Err(Error::InvalidParams(_))),
                "{p:?}"
            );
        }
        assert!(generate_participant(&SynthParams::default(), 14).is_err());
    }

    #[test]
    fn truth_csv_layout() {
        let truth = SynthTruth {
            participant_id: "p01".into(),
            true_acrophase: 1.0,
        };
        let csv = truth.to_csv(Timestamp(26_909_280), 3);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "timestamp_utc,phase_radians");
        assert_eq!(lines[1], "2021-03-01T00:00:00Z,1");
        assert_eq!(lines.len(), 4);
    }
}
