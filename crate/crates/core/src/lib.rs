//! Causal circadian phase estimation from short windows of wearable data.
//!
//! The pipeline aligns sensor streams on a UTC minute grid, cleans and
//! normalizes them per participant, fits a 24 h cosinor to core body
//! temperature to obtain a reference phase, summarizes causal windows
//! `[t − W, t]` into statistics and regresses the `(sin, cos)` encoded phase
//! with tree ensembles under participant-level cross-validation.
//!
//! The numeric kernels are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the pipeline stores.

pub mod circular;
pub mod cosinor;
pub mod data_model;
pub mod error;
pub mod eval;
pub mod features;
pub mod num;
pub mod preprocess;
pub mod seed;
pub mod synth;
pub mod trees;

pub use error::{Error, Result};
pub use num::{Matrix, Real};

pub type CosinorFit = cosinor::CosinorFit<f64>;
pub type CosinorFitF32 = cosinor::CosinorFit<f32>;
pub type PhaseSeries = cosinor::PhaseSeries<f64>;
pub type EncodedTarget = circular::EncodedTarget<f64>;
pub type MetricsReport = circular::MetricsReport<f64>;
