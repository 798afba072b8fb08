use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::boosting::{fit_gradient_boosting, BoostingParams, GradientBoosting};
use super::forest::{fit_random_forest, ForestParams, RandomForest};
use crate::circular::decode_phase;
use crate::error::{Error, Result};
use crate::num::{Matrix, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelFamily {
    #[serde(rename = "RF")]
    RandomForest,
    #[serde(rename = "GBR")]
    GradientBoosting,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 2] = [ModelFamily::RandomForest, ModelFamily::GradientBoosting];
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::RandomForest => "RF",
            ModelFamily::GradientBoosting => "GBR",
        })
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rf" | "random_forest" => Ok(ModelFamily::RandomForest),
            "gbr" | "gradient_boosting" => Ok(ModelFamily::GradientBoosting),
            _ => Err(Error::Config(format!("unknown model family {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum HyperParams {
    #[serde(rename = "RF")]
    Forest(ForestParams),
    #[serde(rename = "GBR")]
    Boosting(BoostingParams),
}

impl HyperParams {
    pub fn family(&self) -> ModelFamily {
        match self {
            HyperParams::Forest(_) => ModelFamily::RandomForest,
            HyperParams::Boosting(_) => ModelFamily::GradientBoosting,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            HyperParams::Forest(p) => p.validate(),
            HyperParams::Boosting(p) => p.validate(),
        }
    }

    /// `(ensemble size, depth)` used to prefer smaller models on ties; an
    /// unlimited depth counts as deepest.
    pub fn size_key(&self) -> (usize, usize) {
        let (n, d) = match self {
            HyperParams::Forest(p) => (p.n_trees, p.max_depth),
            HyperParams::Boosting(p) => (p.n_estimators, p.max_depth),
        };
        (n, d.unwrap_or(usize::MAX))
    }

    pub fn label(&self) -> String {
        let depth = |d: Option<usize>| d.map_or("none".to_string(), |d| d.to_string());
        match self {
            HyperParams::Forest(p) => format!(
                "RF(n_trees={}, max_depth={})",
                p.n_trees,
                depth(p.max_depth)
            ),
            HyperParams::Boosting(p) => {
                format!(
                    "GBR(n_estimators={}, max_depth={})",
                    p.n_estimators,
                    depth(p.max_depth)
                )
            }
        }
    }
}

/// Candidate hyperparameter tuples searched within each training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperGrid {
    pub candidates: Vec<HyperParams>,
}

impl HyperGrid {
    /// Trees {200, 400} × depth {10, unlimited} for RF; estimators
    /// {200, 400} × depth {2, 3} for GBR.
    pub fn default_for(family: ModelFamily) -> Self {
        let mut candidates = Vec::new();
        for n in [200, 400] {
            match family {
                ModelFamily::RandomForest => {
                    for d in [Some(10), None] {
                        candidates.push(HyperParams::Forest(ForestParams {
                            n_trees: n,
                            max_depth: d,
                            ..Default::default()
                        }));
                    }
                }
                ModelFamily::GradientBoosting => {
                    for d in [2, 3] {
                        candidates.push(HyperParams::Boosting(BoostingParams {
                            n_estimators: n,
                            max_depth: Some(d),
                            ..Default::default()
                        }));
                    }
                }
            }
        }
        Self { candidates }
    }

    pub fn single(hp: HyperParams) -> Self {
        Self {
            candidates: vec![hp],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::InvalidHyperparams(
                "hyperparameter grid is empty".into(),
            ));
        }
        self.candidates.iter().try_for_each(HyperParams::validate)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Fitted phase regressor mapping features to a raw `(sin, cos)` vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "model")]
pub enum Model<T> {
    #[serde(rename = "RF")]
    Forest(RandomForest<T>),
    #[serde(rename = "GBR")]
    Boosting(GradientBoosting<T>),
}

pub fn fit_model<T: Real>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    hp: &HyperParams,
    seed: u64,
) -> Result<Model<T>> {
    if y.n_cols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: y.n_cols(),
        });
    }
    Ok(match hp {
        HyperParams::Forest(p) => Model::Forest(fit_random_forest(x, y, p, seed)?),
        HyperParams::Boosting(p) => Model::Boosting(fit_gradient_boosting(x, y, p, seed)?),
    })
}

/// Decoded phase of one row; `zero_vector` marks a `(0, 0)` output, which
/// decodes to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePrediction<T> {
    pub theta: T,
    pub zero_vector: bool,
}

const FORMAT_HEADER: &str = "circaphase-model v1";

impl<T: Real> Model<T> {
    pub fn family(&self) -> ModelFamily {
        match self {
            Model::Forest(_) => ModelFamily::RandomForest,
            Model::Boosting(_) => ModelFamily::GradientBoosting,
        }
    }

    pub fn hyperparams(&self) -> HyperParams {
        match self {
            Model::Forest(m) => HyperParams::Forest(m.params),
            Model::Boosting(m) => HyperParams::Boosting(m.params),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Forest(m) => m.n_features(),
            Model::Boosting(m) => m.n_features(),
        }
    }

    pub fn predict_row(&self, x: &[T]) -> [T; 2] {
        let v = match self {
            Model::Forest(m) => m.predict_row(x),
            Model::Boosting(m) => m.predict_row(x),
        };
        [v[0], v[1]]
    }

    pub fn predict(&self, x: &Matrix<T>) -> Result<Vec<[T; 2]>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.n_cols(),
            });
        }
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|i| self.predict_row(x.row(i)))
            .collect())
    }
}

impl<T: Real + Serialize + DeserializeOwned> Model<T> {
    /// Versioned text form: a header line followed by JSON.
    pub fn to_text(&self) -> Result<String> {
        Ok(format!(
            "{FORMAT_HEADER}\n{}\n",
            serde_json::to_string(self)?
        ))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (header, body) = text
            .split_once('\n')
            .ok_or_else(|| Error::ModelFormat("missing header".into()))?;
        if header.trim_end() != FORMAT_HEADER {
            return Err(Error::ModelFormat(format!("unsupported header {header:?}")));
        }
        Ok(serde_json::from_str(body)?)
    }
}

/// Raw predictions decoded to phases without renormalization.
pub fn predict_phase<T: Real>(model: &Model<T>, x: &Matrix<T>) -> Result<Vec<PhasePrediction<T>>> {
    model
        .predict(x)?
        .into_iter()
        .map(|[s, c]| match decode_phase(s, c) {
            Ok(theta) => Ok(PhasePrediction {
                theta,
                zero_vector: false,
            }),
            Err(Error::ZeroVector) => Ok(PhasePrediction {
                theta: T::zero(),
                zero_vector: true,
            }),
            Err(e) => Err(e),
        })
        .collect()
}
