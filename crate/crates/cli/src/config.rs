//! Experiment configuration: one JSON document with a `version` field.
//!
//! Unknown keys are rejected. Relative paths are resolved against the
//! directory containing the configuration file.

use std::path::{Path, PathBuf};

use circaphase::eval::CvConfig;
use circaphase::features::{Modality, DEFAULT_WINDOWS};
use circaphase::preprocess::PreprocessConfig;
use circaphase::synth::SynthParams;
use circaphase::trees::{HyperGrid, HyperParams, ModelFamily};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// The configuration evaluated by `train`, `evaluate` and `case-study`, and
/// the fixed axis of `sweep` (model, modality) and `ablate` (window).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrimaryConfig {
    pub model: ModelFamily,
    pub modality: Modality,
    pub window_minutes: usize,
}

impl Default for PrimaryConfig {
    fn default() -> Self {
        Self {
            model: ModelFamily::RandomForest,
            modality: Modality::M5,
            window_minutes: 480,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseStudyConfig {
    /// Participants to trace; empty means all.
    pub participants: Vec<String>,
}

fn default_windows() -> Vec<usize> {
    DEFAULT_WINDOWS.to_vec()
}

fn default_stride() -> usize {
    10
}

fn default_coverage() -> f64 {
    0.8
}

fn default_modalities() -> Vec<Modality> {
    Modality::ALL.to_vec()
}

fn default_models() -> Vec<ModelFamily> {
    ModelFamily::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    /// Cohort directory; when absent the cohort is generated from `synth`.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    #[serde(default)]
    pub synth: Option<SynthParams>,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default = "default_windows")]
    pub windows: Vec<usize>,
    #[serde(default = "default_stride")]
    pub stride_minutes: usize,
    #[serde(default = "default_coverage")]
    pub min_coverage: f64,
    #[serde(default = "default_modalities")]
    pub modalities: Vec<Modality>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelFamily>,
    /// Replaces the default search grid of every family that appears here.
    #[serde(default)]
    pub grid: Option<Vec<HyperParams>>,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default)]
    pub primary: PrimaryConfig,
    #[serde(default)]
    pub case_study: CaseStudyConfig,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub window: Option<usize>,
    pub modality: Option<Modality>,
    pub model: Option<ModelFamily>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.output_dir = base.join(&cfg.output_dir);
        cfg.data_dir = cfg.data_dir.map(|d| base.join(d));
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.cv.seed = seed;
            if let Some(s) = &mut self.synth {
                s.seed = seed;
            } else if self.data_dir.is_none() {
                self.synth = Some(SynthParams {
                    seed,
                    ..SynthParams::default()
                });
            }
        }
        if let Some(w) = o.window {
            self.primary.window_minutes = w;
            self.windows = vec![w];
        }
        if let Some(m) = o.modality {
            self.primary.modality = m;
            self.modalities = vec![m];
        }
        if let Some(f) = o.model {
            self.primary.model = f;
            self.models = vec![f];
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != CONFIG_VERSION {
            return Err(config_err(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if let Some(d) = &self.data_dir {
            if !d.is_dir() {
                return Err(config_err(format!(
                    "data_dir {} does not exist",
                    d.display()
                )));
            }
        }
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        self.preprocess.validate()?;
        if self.windows.is_empty() || self.modalities.is_empty() || self.models.is_empty() {
            return Err(config_err(
                "windows, modalities and models must be non-empty",
            ));
        }
        for &w in self.windows.iter().chain([&self.primary.window_minutes]) {
            self.window_config(w).validate()?;
        }
        if self.cv.k < 2 || self.cv.inner_k < 2 {
            return Err(config_err("cv.k and cv.inner_k must be at least 2"));
        }
        for f in ModelFamily::ALL {
            self.grid_for(f).validate()?;
        }
        Ok(())
    }

    pub fn window_config(&self, w: usize) -> circaphase::features::WindowConfig {
        circaphase::features::WindowConfig {
            window_minutes: w,
            stride_minutes: self.stride_minutes,
            min_coverage: self.min_coverage,
        }
    }

    pub fn synth_params(&self) -> SynthParams {
        self.synth.clone().unwrap_or_default()
    }

    pub fn grid_for(&self, family: ModelFamily) -> HyperGrid {
        let custom: Vec<HyperParams> = self
            .grid
            .iter()
            .flatten()
            .copied()
            .filter(|h| h.family() == family)
            .collect();
        if custom.is_empty() {
            HyperGrid::default_for(family)
        } else {
            HyperGrid { candidates: custom }
        }
    }
}
