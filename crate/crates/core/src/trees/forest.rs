use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cart::{check_training_data, grow, Presorted, RegressionTree, TreeConfig};
use crate::error::{Error, Result};
use crate::num::{Matrix, Real};
use crate::seed::job_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    /// Fraction of features considered at each node, rounded up.
    pub max_features_fraction: f64,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: None,
            max_features_fraction: 1.0 / 3.0,
            min_samples_leaf: 1,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidHyperparams(m.to_string()));
        if self.n_trees == 0 {
            return bad("n_trees must be positive");
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be positive");
        }
        if !(self.max_features_fraction > 0.0 && self.max_features_fraction <= 1.0) {
            return bad("max_features_fraction must lie in (0, 1]");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        Ok(())
    }

    pub fn features_per_node(&self, p: usize) -> usize {
        ((self.max_features_fraction * p as f64).ceil() as usize).clamp(1, p.max(1))
    }
}

pub const MIN_TRAINING_ROWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest<T> {
    pub params: ForestParams,
    pub seed: u64,
    trees: Vec<RegressionTree<T>>,
}

impl<T: Real> RandomForest<T> {
    /// Assembles a forest from already grown trees.
    pub fn from_trees(
        params: ForestParams,
        seed: u64,
        trees: Vec<RegressionTree<T>>,
    ) -> Result<Self> {
        let first = trees.first().ok_or(Error::EmptyInput)?;
        let dims = (first.n_features(), first.n_outputs());
        if let Some(t) = trees
            .iter()
            .find(|t| (t.n_features(), t.n_outputs()) != dims)
        {
            return Err(Error::DimensionMismatch {
                expected: dims.0,
                found: t.n_features(),
            });
        }
        Ok(Self {
            params,
            seed,
            trees,
        })
    }

    pub fn trees(&self) -> &[RegressionTree<T>] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }

    pub fn n_outputs(&self) -> usize {
        self.trees[0].n_outputs()
    }

    /// Mean of the member trees' leaf vectors.
    pub fn predict_row(&self, x: &[T]) -> Vec<T> {
        let mut acc = vec![T::zero(); self.n_outputs()];
        for t in &self.trees {
            for (a, &v) in acc.iter_mut().zip(t.predict_row(x)) {
                *a += v;
            }
        }
        let n = T::from_count(self.trees.len());
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// Bootstrap multiplicities for `n` draws with replacement.
fn bootstrap_weights<T: Real, R: Rng>(n: usize, rng: &mut R) -> Vec<T> {
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
        .into_iter()
        .map(|c| T::from_u32(c).expect("count"))
        .collect()
}

/// Trees are grown independently from per-tree seeds derived from `seed`, so
/// the result does not depend on how many threads build them.
pub fn fit_random_forest<T: Real>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    params: &ForestParams,
    seed: u64,
) -> Result<RandomForest<T>> {
    params.validate()?;
    check_training_data(x, y, MIN_TRAINING_ROWS)?;
    let data = Presorted::new(x)?;
    let cfg = TreeConfig {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: Some(params.features_per_node(x.n_cols())),
    };
    let n = data.n_rows();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = job_rng(seed, &format!("tree/{i}"));
            let w = if params.bootstrap {
                bootstrap_weights(n, &mut rng)
            } else {
                vec![T::one(); n]
            };
            grow(&data, y.as_slice(), y.n_cols(), &w, &cfg, &mut rng)
        })
        .collect();
    Ok(RandomForest {
        params: *params,
        seed,
        trees,
    })
}
