//! Regression-tree ensembles for the two-coordinate phase target.

mod boosting;
mod cart;
mod forest;
mod model;

pub use boosting::{fit_gradient_boosting, BoostedEnsemble, BoostingParams, GradientBoosting};
pub use cart::{fit_tree, RegressionTree, TreeConfig, TreeNode};
pub use forest::{fit_random_forest, ForestParams, RandomForest, MIN_TRAINING_ROWS};
pub use model::{
    fit_model, predict_phase, HyperGrid, HyperParams, Model, ModelFamily, PhasePrediction,
};
