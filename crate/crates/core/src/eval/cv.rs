use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{participant_kfold, FoldPlan};
use crate::circular::{metrics_report, phase_to_hours, wrapped_error, MetricsReport};
use crate::cosinor::{fit_per_segment, PhaseReference, DEFAULT_MIN_SPAN_MINUTES};
use crate::data_model::{ChannelId, ParticipantRecording, Timestamp};
use crate::error::{Error, Result};
use crate::features::{build_dataset, FeatureDataset, Modality, WindowConfig};
use crate::num::Matrix;
use crate::preprocess::{preprocess_recording, NormStats, PreprocessConfig};
use crate::seed::derive_seed;
use crate::trees::{fit_model, predict_phase, HyperGrid, HyperParams, Model, ModelFamily};

/// One participant after cleaning, normalization and reference fitting.
#[derive(Debug, Clone)]
pub struct PreparedParticipant {
    pub raw: ParticipantRecording,
    pub processed: ParticipantRecording,
    pub norm_stats: BTreeMap<ChannelId, NormStats>,
    pub reference: PhaseReference,
}

impl PreparedParticipant {
    pub fn id(&self) -> &str {
        &self.raw.participant_id
    }
}

pub fn prepare_participant(
    raw: ParticipantRecording,
    cfg: &PreprocessConfig,
) -> Result<PreparedParticipant> {
    let (processed, norm_stats) = preprocess_recording(&raw, cfg)?;
    let reference = fit_per_segment(
        &processed.cbt,
        &processed.cbt_coverage,
        DEFAULT_MIN_SPAN_MINUTES,
    );
    if reference.segments.is_empty() {
        log::warn!("{}: no CBT segment could be fitted", raw.participant_id);
    }
    Ok(PreparedParticipant {
        raw,
        processed,
        norm_stats,
        reference,
    })
}

pub fn prepare_cohort(
    raw: Vec<ParticipantRecording>,
    cfg: &PreprocessConfig,
) -> Result<Vec<PreparedParticipant>> {
    cfg.validate()?;
    raw.into_par_iter()
        .map(|r| prepare_participant(r, cfg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k: usize,
    pub inner_k: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 5,
            inner_k: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub participant_id: Arc<str>,
    pub fold: usize,
    pub end_time: Timestamp,
    pub ref_theta: f64,
    pub pred_theta: f64,
    pub zero_vector: bool,
}

impl Prediction {
    pub fn abs_err_hours(&self) -> f64 {
        phase_to_hours(wrapped_error(self.pred_theta, self.ref_theta).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub test_participants: Vec<String>,
    pub n_train_rows: usize,
    pub chosen: HyperParams,
    pub metrics: MetricsReport<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub family: ModelFamily,
    pub modality: Modality,
    pub window_minutes: usize,
    pub per_fold: Vec<FoldOutcome>,
    /// Mean of the per-fold CMAEs.
    pub mean_cmae_hours: f64,
    /// Population standard deviation of the per-fold CMAEs.
    pub sd_cmae_hours: f64,
    /// Metrics over all test predictions pooled.
    pub pooled: MetricsReport<f64>,
    pub predictions: Vec<Prediction>,
}

/// Features and targets of several datasets, stacked in order.
pub(crate) fn stack(parts: &[&FeatureDataset]) -> (Matrix<f64>, Matrix<f64>) {
    let p = parts.first().map_or(0, |d| d.feature_names.len());
    let mut x = Vec::new();
    let mut y = Vec::new();
    for d in parts {
        for r in &d.rows {
            x.extend_from_slice(&r.features);
            y.extend_from_slice(&r.target.as_array());
        }
    }
    let n = y.len() / 2;
    (Matrix::new(x, n, p), Matrix::new(y, n, 2))
}

fn dataset_id(d: &FeatureDataset) -> &str {
    d.rows.first().map_or("", |r| &r.participant_id)
}

fn evaluate_on(
    model: &Model<f64>,
    test: &[&FeatureDataset],
) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
    let (x, _) = stack(test);
    let preds = predict_phase(model, &x)?;
    let refs: Vec<f64> = test
        .iter()
        .flat_map(|d| d.rows.iter().map(|r| r.ref_theta))
        .collect();
    Ok((
        preds.iter().map(|p| p.theta).collect(),
        refs,
        preds.iter().map(|p| p.zero_vector).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub best: HyperParams,
    /// Mean inner-fold CMAE per candidate; empty when the grid has one entry.
    pub mean_cmae_hours: Vec<f64>,
}

/// Chooses the candidate with the lowest mean inner-fold CMAE. Ties go to the
/// smaller ensemble, then the shallower one, then the earlier candidate.
pub fn grid_search(
    train: &[&FeatureDataset],
    grid: &HyperGrid,
    inner_k: usize,
    seed: u64,
) -> Result<GridSearchOutcome> {
    grid.validate()?;
    if grid.len() == 1 {
        return Ok(GridSearchOutcome {
            best: grid.candidates[0],
            mean_cmae_hours: Vec::new(),
        });
    }
    let ids: Vec<&str> = train.iter().map(|d| dataset_id(d)).collect();
    let plan = participant_kfold(&ids, inner_k, derive_seed(seed, "inner-folds"))?;
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..inner_k).map(move |j| (c, j)))
        .collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, j)| -> Result<f64> {
            let (fit_on, held): (Vec<&FeatureDataset>, Vec<&FeatureDataset>) = train
                .iter()
                .partition(|d| plan.fold_of(dataset_id(d)) != Some(j));
            let (x, y) = stack(&fit_on);
            let model = fit_model(
                &x,
                &y,
                &grid.candidates[c],
                derive_seed(seed, &format!("inner/{c}/{j}")),
            )?;
            let (pred, refs, _) = evaluate_on(&model, &held)?;
            Ok(metrics_report(&pred, &refs)?.cmae_hours)
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = scores
        .chunks(inner_k)
        .map(|s| s.iter().sum::<f64>() / inner_k as f64)
        .collect();
    let mut best = 0;
    for c in 1..grid.len() {
        let key = |i: usize| (means[i], grid.candidates[i].size_key());
        let (mc, kc) = key(c);
        let (mb, kb) = key(best);
        if mc < mb || (mc == mb && kc < kb) {
            best = c;
        }
    }
    Ok(GridSearchOutcome {
        best: grid.candidates[best],
        mean_cmae_hours: means,
    })
}

/// Participant-level cross-validation over per-participant datasets.
pub fn run_cv(
    datasets: &[FeatureDataset],
    grid: &HyperGrid,
    plan: &FoldPlan,
    cv: &CvConfig,
) -> Result<EvalReport> {
    grid.validate()?;
    let first = datasets.first().ok_or(Error::EmptyInput)?;
    for d in datasets {
        if plan.fold_of(dataset_id(d)).is_none() {
            return Err(Error::UnknownParticipant(dataset_id(d).to_string()));
        }
    }
    let outcomes: Vec<(FoldOutcome, Vec<Prediction>)> = (0..plan.k)
        .into_par_iter()
        .map(|f| -> Result<_> {
            let (test, train): (Vec<&FeatureDataset>, Vec<&FeatureDataset>) = datasets
                .iter()
                .partition(|d| plan.fold_of(dataset_id(d)) == Some(f));
            let test_ids: BTreeSet<&str> = test.iter().map(|d| dataset_id(d)).collect();
            if train.iter().any(|d| test_ids.contains(dataset_id(d))) {
                return Err(Error::Leakage(f));
            }
            let n_test: usize = test.iter().map(|d| d.len()).sum();
            if n_test == 0 {
                return Err(Error::EmptyFold(f));
            }
            let search = grid_search(
                &train,
                grid,
                cv.inner_k,
                derive_seed(cv.seed, &format!("cv/fold{f}/grid")),
            )?;
            let (x, y) = stack(&train);
            let model = fit_model(
                &x,
                &y,
                &search.best,
                derive_seed(cv.seed, &format!("cv/fold{f}/fit")),
            )?;
            let (pred, refs, zero) = evaluate_on(&model, &test)?;
            let metrics = metrics_report(&pred, &refs)?;
            let rows = test.iter().flat_map(|d| d.rows.iter());
            let predictions = rows
                .zip(pred.iter().zip(&zero))
                .map(|(r, (&p, &z))| Prediction {
                    participant_id: r.participant_id.clone(),
                    fold: f,
                    end_time: r.end_time,
                    ref_theta: r.ref_theta,
                    pred_theta: p,
                    zero_vector: z,
                })
                .collect();
            let outcome = FoldOutcome {
                fold: f,
                test_participants: plan.test_ids(f).iter().map(|s| s.to_string()).collect(),
                n_train_rows: x.n_rows(),
                chosen: search.best,
                metrics,
            };
            Ok((outcome, predictions))
        })
        .collect::<Result<_>>()?;

    let (per_fold, preds): (Vec<FoldOutcome>, Vec<Vec<Prediction>>) = outcomes.into_iter().unzip();
    let predictions: Vec<Prediction> = preds.into_iter().flatten().collect();
    let cmaes: Vec<f64> = per_fold.iter().map(|f| f.metrics.cmae_hours).collect();
    let mean = cmaes.iter().sum::<f64>() / cmaes.len() as f64;
    let sd = (cmaes.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / cmaes.len() as f64).sqrt();
    let pooled = metrics_report(
        &predictions.iter().map(|p| p.pred_theta).collect::<Vec<_>>(),
        &predictions.iter().map(|p| p.ref_theta).collect::<Vec<_>>(),
    )?;
    Ok(EvalReport {
        family: grid.candidates[0].family(),
        modality: first.modality,
        window_minutes: first.window.window_minutes,
        per_fold,
        mean_cmae_hours: mean,
        sd_cmae_hours: sd,
        pooled,
        predictions,
    })
}

/// A prepared cohort with a fixed outer fold plan shared by every experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub participants: Vec<PreparedParticipant>,
    pub plan: FoldPlan,
    pub cv: CvConfig,
    pub stride_minutes: usize,
    pub min_coverage: f64,
}

impl Experiment {
    pub fn new(mut participants: Vec<PreparedParticipant>, cv: CvConfig) -> Result<Self> {
        participants.sort_by(|a, b| a.id().cmp(b.id()));
        let ids: Vec<&str> = participants.iter().map(|p| p.id()).collect();
        let plan = participant_kfold(&ids, cv.k, cv.seed)?;
        Ok(Self {
            participants,
            plan,
            cv,
            stride_minutes: 10,
            min_coverage: 0.8,
        })
    }

    pub fn window(&self, window_minutes: usize) -> WindowConfig {
        WindowConfig {
            window_minutes,
            stride_minutes: self.stride_minutes,
            min_coverage: self.min_coverage,
        }
    }

    pub fn participant(&self, id: &str) -> Result<&PreparedParticipant> {
        self.participants
            .iter()
            .find(|p| p.id() == id)
            .ok_or_else(|| Error::UnknownParticipant(id.to_string()))
    }

    /// Per-participant datasets; participants without usable rows are skipped.
    pub fn datasets(
        &self,
        modality: Modality,
        window_minutes: usize,
    ) -> Result<Vec<FeatureDataset>> {
        let win = self.window(window_minutes);
        let built: Vec<Option<FeatureDataset>> = self
            .participants
            .par_iter()
            .map(
                |p| match build_dataset(&p.processed, &p.reference, modality, &win) {
                    Ok(d) => Ok(Some(d)),
                    Err(Error::NoCoverage(id)) => {
                        log::warn!("{id}: no feature rows for {modality} W={window_minutes}");
                        Ok(None)
                    }
                    Err(e) => Err(e),
                },
            )
            .collect::<Result<_>>()?;
        Ok(built.into_iter().flatten().collect())
    }

    pub fn evaluate(
        &self,
        grid: &HyperGrid,
        modality: Modality,
        window_minutes: usize,
    ) -> Result<EvalReport> {
        run_cv(
            &self.datasets(modality, window_minutes)?,
            grid,
            &self.plan,
            &self.cv,
        )
    }

    /// One report per window length, in the given order.
    pub fn window_sweep(
        &self,
        grid: &HyperGrid,
        modality: Modality,
        windows: &[usize],
    ) -> Result<Vec<EvalReport>> {
        windows
            .iter()
            .map(|&w| self.evaluate(grid, modality, w))
            .collect()
    }

    /// Reports for every modality × grid, modality-major.
    pub fn modality_ablation(
        &self,
        grids: &[HyperGrid],
        modalities: &[Modality],
        window_minutes: usize,
    ) -> Result<Vec<EvalReport>> {
        let mut out = Vec::new();
        for &m in modalities {
            let ds = self.datasets(m, window_minutes)?;
            for g in grids {
                out.push(run_cv(&ds, g, &self.plan, &self.cv)?);
            }
        }
        Ok(out)
    }

    /// Fits one model on every participant's rows.
    pub fn train_all(
        &self,
        grid: &HyperGrid,
        modality: Modality,
        window_minutes: usize,
    ) -> Result<Model<f64>> {
        let ds = self.datasets(modality, window_minutes)?;
        let refs: Vec<&FeatureDataset> = ds.iter().collect();
        let search = grid_search(
            &refs,
            grid,
            self.cv.inner_k,
            derive_seed(self.cv.seed, "all/grid"),
        )?;
        let (x, y) = stack(&refs);
        fit_model(&x, &y, &search.best, derive_seed(self.cv.seed, "all/fit"))
    }
}
