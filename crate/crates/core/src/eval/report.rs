//! CSV renderings of experiment results.

use std::fmt::Write as _;

use super::cv::EvalReport;
use crate::trees::ModelFamily;

/// One row per report: window length, model, modality and error summary.
pub fn window_table_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from(
        "window_minutes,model,modality,cmae_mean_hours,cmae_sd_hours,within_1h_pct,within_2h_pct,n_predictions\n",
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.window_minutes,
            r.family,
            r.modality,
            r.mean_cmae_hours,
            r.sd_cmae_hours,
            100.0 * r.pooled.within_1h,
            100.0 * r.pooled.within_2h,
            r.pooled.n
        );
    }
    out
}

/// Long-format CMAE by modality and window length.
pub fn window_curve_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("modality,window_minutes,model,cmae_mean_hours,cmae_sd_hours\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.modality, r.window_minutes, r.family, r.mean_cmae_hours, r.sd_cmae_hours
        );
    }
    out
}

/// Wide table: one row per modality, mean and sd columns per model family.
pub fn modality_table_csv(reports: &[EvalReport]) -> String {
    let mut families: Vec<ModelFamily> = reports.iter().map(|r| r.family).collect();
    families.sort();
    families.dedup();
    let mut modalities: Vec<_> = reports.iter().map(|r| r.modality).collect();
    modalities.dedup();
    let mut out = String::from("modality,description,n_features");
    for f in &families {
        let _ = write!(out, ",{f}_cmae_mean_hours,{f}_cmae_sd_hours");
    }
    out.push('\n');
    for m in modalities {
        let _ = write!(out, "{m},{},{}", m.label(), m.n_features());
        for f in &families {
            match reports.iter().find(|r| r.modality == m && r.family == *f) {
                Some(r) => {
                    let _ = write!(out, ",{},{}", r.mean_cmae_hours, r.sd_cmae_hours);
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn folds_csv(r: &EvalReport) -> String {
    let mut out = String::from(
        "fold,test_participants,n_train_rows,n_test_rows,chosen,cmae_hours,within_1h,within_2h\n",
    );
    for f in &r.per_fold {
        let _ = writeln!(
            out,
            "{},{},{},{},\"{}\",{},{},{}",
            f.fold,
            f.test_participants.join(";"),
            f.n_train_rows,
            f.metrics.n,
            f.chosen.label(),
            f.metrics.cmae_hours,
            f.metrics.within_1h,
            f.metrics.within_2h
        );
    }
    out
}

pub fn predictions_csv(r: &EvalReport) -> String {
    let mut out = String::from(
        "participant_id,fold,end_time,ref_theta,pred_theta,abs_err_hours,zero_vector\n",
    );
    for p in &r.predictions {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.participant_id,
            p.fold,
            p.end_time,
            p.ref_theta,
            p.pred_theta,
            p.abs_err_hours(),
            p.zero_vector
        );
    }
    out
}
