//! Participant-level evaluation: fold planning, cross-validation with nested
//! grid search, window and modality sweeps, day/night comparison and the
//! leave-one-out case study.

mod analysis;
mod cv;
mod folds;
pub mod report;
mod utest;

pub use analysis::{
    day_night_eval, is_daytime, loo_case_study, CaseTrace, DayNightReport, TraceRow,
};
pub use cv::{
    grid_search, prepare_cohort, prepare_participant, run_cv, CvConfig, EvalReport, Experiment,
    FoldOutcome, GridSearchOutcome, Prediction, PreparedParticipant,
};
pub use folds::{participant_kfold, FoldPlan};
pub use utest::{
    mann_whitney_u, mann_whitney_u_normal, normal_p_value, UTestMethod, UTestResult, EXACT_LIMIT,
};
