use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::cv::{grid_search, stack, Experiment, Prediction};
use super::utest::{mann_whitney_u, UTestResult};
use crate::circular::{metrics_report, phase_to_hours, wrapped_error, MetricsReport};
use crate::data_model::{ChannelId, Timestamp};
use crate::error::{Error, Result};
use crate::features::{build_dataset, FeatureDataset, Modality};
use crate::seed::derive_seed;
use crate::trees::{fit_model, predict_phase, HyperGrid, HyperParams};

/// Day is clock time [08:00, 24:00); night is [00:00, 08:00).
pub fn is_daytime(t: Timestamp) -> bool {
    t.minute_of_day() >= 8 * 60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayNightReport {
    pub day: MetricsReport<f64>,
    pub night: MetricsReport<f64>,
    /// Day absolute errors as the first sample.
    pub test: UTestResult,
}

impl DayNightReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "stratum,n,cmae_hours,within_1h,within_2h,u_statistic,p_value_two_sided\n",
        );
        for (name, m) in [("day", &self.day), ("night", &self.night)] {
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{},{}",
                m.n,
                m.cmae_hours,
                m.within_1h,
                m.within_2h,
                self.test.u_statistic,
                self.test.p_value_two_sided
            );
        }
        out
    }
}

pub fn day_night_eval(predictions: &[Prediction]) -> Result<DayNightReport> {
    let (day, night): (Vec<&Prediction>, Vec<&Prediction>) =
        predictions.iter().partition(|p| is_daytime(p.end_time));
    if day.is_empty() {
        return Err(Error::EmptyStratum("day"));
    }
    if night.is_empty() {
        return Err(Error::EmptyStratum("night"));
    }
    let metrics = |ps: &[&Prediction]| {
        let pred: Vec<f64> = ps.iter().map(|p| p.pred_theta).collect();
        let refs: Vec<f64> = ps.iter().map(|p| p.ref_theta).collect();
        metrics_report(&pred, &refs)
    };
    let errs = |ps: &[&Prediction]| ps.iter().map(|p| p.abs_err_hours()).collect::<Vec<f64>>();
    Ok(DayNightReport {
        day: metrics(&day)?,
        night: metrics(&night)?,
        test: mann_whitney_u(&errs(&day), &errs(&night))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub end_time: Timestamp,
    pub ref_theta: f64,
    pub pred_theta: f64,
    pub abs_err_hours: f64,
    /// Raw channel values at `end_time`, NaN where missing.
    pub channels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseTrace {
    pub participant_id: String,
    pub chosen: HyperParams,
    pub channel_names: Vec<String>,
    pub rows: Vec<TraceRow>,
}

impl CaseTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("end_time,ref_theta,pred_theta,abs_err_hours");
        for c in &self.channel_names {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{}",
                r.end_time, r.ref_theta, r.pred_theta, r.abs_err_hours
            );
            for v in &r.channels {
                if v.is_nan() {
                    out.push(',');
                } else {
                    let _ = write!(out, ",{v}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Trains on every other participant and predicts the target's coverage.
pub fn loo_case_study(
    exp: &Experiment,
    target: &str,
    modality: Modality,
    window_minutes: usize,
    grid: &HyperGrid,
) -> Result<CaseTrace> {
    let tp = exp.participant(target)?;
    if exp.participants.len() < 2 {
        return Err(Error::TooFewParticipants {
            needed: 2,
            have: exp.participants.len(),
        });
    }
    let win = exp.window(window_minutes);
    let test = build_dataset(&tp.processed, &tp.reference, modality, &win)?;
    let train: Vec<FeatureDataset> = exp
        .datasets(modality, window_minutes)?
        .into_iter()
        .filter(|d| d.rows.first().is_some_and(|r| &*r.participant_id != target))
        .collect();
    let train_refs: Vec<&FeatureDataset> = train.iter().collect();
    let seed = exp.cv.seed;
    let search = grid_search(
        &train_refs,
        grid,
        exp.cv.inner_k,
        derive_seed(seed, &format!("loo/{target}/grid")),
    )?;
    let (x, y) = stack(&train_refs);
    let model = fit_model(
        &x,
        &y,
        &search.best,
        derive_seed(seed, &format!("loo/{target}/fit")),
    )?;
    let (xt, _) = stack(&[&test]);
    let preds = predict_phase(&model, &xt)?;

    let raw = &tp.raw;
    let series: Vec<_> = raw
        .channels
        .values()
        .chain(std::iter::once(&raw.cbt))
        .collect();
    let channel_names = series
        .iter()
        .map(|s| s.channel.name().to_string())
        .collect();
    let rows = test
        .rows
        .iter()
        .zip(&preds)
        .map(|(r, p)| TraceRow {
            end_time: r.end_time,
            ref_theta: r.ref_theta,
            pred_theta: p.theta,
            abs_err_hours: phase_to_hours(wrapped_error(p.theta, r.ref_theta).abs()),
            channels: series
                .iter()
                .map(|s| {
                    s.index_of(r.end_time)
                        .and_then(|i| s.get(i))
                        .unwrap_or(f64::NAN)
                })
                .collect(),
        })
        .collect();
    debug_assert!(series.iter().all(|s| s.channel != ChannelId::AccNet));
    Ok(CaseTrace {
        participant_id: target.to_string(),
        chosen: search.best,
        channel_names,
        rows,
    })
}
