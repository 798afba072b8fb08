use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cart::{check_training_data, grow, Presorted, RegressionTree, TreeConfig};
use super::forest::MIN_TRAINING_ROWS;
use crate::error::{Error, Result};
use crate::num::{Matrix, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostingParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self {
            n_estimators: 200,
            max_depth: Some(3),
            learning_rate: 0.1,
            min_samples_leaf: 5,
        }
    }
}

impl BoostingParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidHyperparams(m.to_string()));
        if self.n_estimators == 0 {
            return bad("n_estimators must be positive");
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        Ok(())
    }
}

/// Additive squared-loss ensemble for one output coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedEnsemble<T> {
    pub init: T,
    pub learning_rate: T,
    pub stages: Vec<RegressionTree<T>>,
}

impl<T: Real> BoostedEnsemble<T> {
    pub fn predict_row(&self, x: &[T]) -> T {
        self.stages.iter().fold(self.init, |f, t| {
            f + self.learning_rate * t.predict_row(x)[0]
        })
    }
}

/// One independent ensemble per output column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting<T> {
    pub params: BoostingParams,
    n_features: usize,
    ensembles: Vec<BoostedEnsemble<T>>,
}

impl<T: Real> GradientBoosting<T> {
    pub fn ensembles(&self) -> &[BoostedEnsemble<T>] {
        &self.ensembles
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_row(&self, x: &[T]) -> Vec<T> {
        self.ensembles.iter().map(|e| e.predict_row(x)).collect()
    }

    /// Mean squared training error summed over outputs, after each stage
    /// (index 0 is the constant initialization).
    pub fn staged_loss(&self, x: &Matrix<T>, y: &Matrix<T>) -> Vec<T> {
        let n = x.n_rows();
        let stages = self.params.n_estimators;
        let mut loss = vec![T::zero(); stages + 1];
        for (j, e) in self.ensembles.iter().enumerate() {
            for i in 0..n {
                let mut f = e.init;
                let r = y.get(i, j) - f;
                loss[0] += r * r;
                for (s, t) in e.stages.iter().enumerate() {
                    f += e.learning_rate * t.predict_row(x.row(i))[0];
                    let r = y.get(i, j) - f;
                    loss[s + 1] += r * r;
                }
            }
        }
        let nf = T::from_count(n);
        loss.iter_mut().for_each(|l| *l /= nf);
        loss
    }
}

/// Fits each output column with its own boosted ensemble. Trees use every
/// feature, so `seed` only labels the model; training is deterministic.
pub fn fit_gradient_boosting<T: Real>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    params: &BoostingParams,
    seed: u64,
) -> Result<GradientBoosting<T>> {
    params.validate()?;
    check_training_data(x, y, MIN_TRAINING_ROWS)?;
    let data = Presorted::new(x)?;
    let cfg = TreeConfig {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: None,
    };
    let lr = T::lit(params.learning_rate);
    let n = x.n_rows();
    let w = vec![T::one(); n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ensembles = (0..y.n_cols())
        .map(|j| {
            let target: Vec<T> = (0..n).map(|i| y.get(i, j)).collect();
            let init = target.iter().copied().sum::<T>() / T::from_count(n);
            let mut f = vec![init; n];
            let mut stages = Vec::with_capacity(params.n_estimators);
            let mut residual = vec![T::zero(); n];
            for _ in 0..params.n_estimators {
                for i in 0..n {
                    residual[i] = target[i] - f[i];
                }
                let tree = grow(&data, &residual, 1, &w, &cfg, &mut rng);
                for i in 0..n {
                    f[i] += lr * tree.predict_row(x.row(i))[0];
                }
                stages.push(tree);
            }
            BoostedEnsemble {
                init,
                learning_rate: lr,
                stages,
            }
        })
        .collect();
    Ok(GradientBoosting {
        params: *params,
        n_features: x.n_cols(),
        ensembles,
    })
}
