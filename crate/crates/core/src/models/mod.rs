//! The four classifier families, a shared scoring contract and model files.
//!
//! Trees and forests work on raw features; logistic regression and the SVM
//! standardize with statistics from the training data.

mod boost;
mod forest;
mod logistic;
mod matrix;
mod persist;
mod standardize;
mod svm;
mod tree;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use boost::BoostParams;
pub use forest::ForestParams;
pub use logistic::{fit_logistic, LogisticObjective, LogisticParams};
pub use matrix::Matrix;
pub use persist::{load_model, model_from_json, model_to_json, save_model, SCHEMA_VERSION};
pub use standardize::Standardizer;
pub use svm::{fit_platt, kkt_violation, platt_probability, rbf, solve_smo, SmoSolution, SvmModel, SvmParams};
pub use tree::{Node, Tree};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_NAMES};
use crate::util::sigmoid;

/// Forest margins are logit(fraction) clamped to this magnitude.
pub const FOREST_MARGIN_CLAMP: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    RandomForest(ForestParams),
    GradientBoost(BoostParams),
    LogisticRegression(LogisticParams),
    RbfSvm(SvmParams),
}

impl ModelSpec {
    pub fn random_forest() -> Self {
        ModelSpec::RandomForest(ForestParams::default())
    }
    pub fn gradient_boost() -> Self {
        ModelSpec::GradientBoost(BoostParams::default())
    }
    pub fn logistic_regression() -> Self {
        ModelSpec::LogisticRegression(LogisticParams::default())
    }
    pub fn rbf_svm() -> Self {
        ModelSpec::RbfSvm(SvmParams::default())
    }

    /// The four configurations with their default hyperparameters.
    pub fn standard_set() -> Vec<ModelSpec> {
        vec![Self::gradient_boost(), Self::random_forest(), Self::logistic_regression(), Self::rbf_svm()]
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::RandomForest(_) => "random_forest",
            ModelSpec::GradientBoost(_) => "gradient_boost",
            ModelSpec::LogisticRegression(_) => "logistic_regression",
            ModelSpec::RbfSvm(_) => "rbf_svm",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{}: {what}", self.name())));
        match self {
            ModelSpec::RandomForest(p) => {
                if p.trees == 0 || p.max_depth == 0 || p.max_features == 0 {
                    return bad("trees, max_depth and max_features must be positive");
                }
            }
            ModelSpec::GradientBoost(p) => {
                if p.trees == 0 || p.max_depth == 0 {
                    return bad("trees and max_depth must be positive");
                }
                if !(p.learning_rate >= 0.0 && p.learning_rate.is_finite()) {
                    return bad("learning_rate must be finite and >= 0");
                }
                if !(p.l2_leaf_penalty >= 0.0 && p.l2_leaf_penalty.is_finite()) {
                    return bad("l2_leaf_penalty must be >= 0");
                }
            }
            ModelSpec::LogisticRegression(p) => {
                if !(p.lambda >= 0.0 && p.lambda.is_finite()) || !(p.gradient_tolerance > 0.0) {
                    return bad("lambda must be >= 0 and gradient_tolerance > 0");
                }
            }
            ModelSpec::RbfSvm(p) => {
                if !(p.c > 0.0 && p.sigma > 0.0 && p.tolerance > 0.0) {
                    return bad("c, sigma and tolerance must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn is_tree_ensemble(&self) -> bool {
        matches!(self, ModelSpec::RandomForest(_) | ModelSpec::GradientBoost(_))
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Forest { trees: Vec<Tree> },
    Boost { base_margin: f64, trees: Vec<Tree> },
    Logistic { weights: Vec<f64>, intercept: f64 },
    Svm(SvmModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub training_seed: u64,
    pub standardizer: Option<Standardizer>,
    pub params: ModelParams,
}

fn check_training_data(x: &Matrix, y: &[bool], names: &[&str]) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::Invalid(format!("{} rows but {} labels", x.n_rows(), y.len())));
    }
    if x.n_cols() != names.len() || x.n_cols() == 0 {
        return Err(Error::Invalid(format!("{} columns but {} feature names", x.n_cols(), names.len())));
    }
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::Invalid("training data must contain both classes".into()));
    }
    if x.rows().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("training data contains missing or non-finite feature values".into()));
    }
    Ok(())
}

/// Train one model on a design matrix with boolean labels.
pub fn train(spec: &ModelSpec, x: &Matrix, y: &[bool], names: &[&str], seed: u64) -> Result<TrainedModel> {
    spec.validate()?;
    check_training_data(x, y, names)?;
    let feature_names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let (standardizer, params) = match spec {
        ModelSpec::RandomForest(p) => (None, ModelParams::Forest { trees: forest::train_forest(p, x, y, seed) }),
        ModelSpec::GradientBoost(p) => {
            let base_margin = boost::base_margin(y);
            (None, ModelParams::Boost { base_margin, trees: boost::train_boost(p, x, y, base_margin) })
        }
        ModelSpec::LogisticRegression(p) => {
            let s = Standardizer::fit(x, &feature_names);
            let z = s.apply_matrix(x);
            let obj = LogisticObjective { x: &z, y, lambda: p.lambda };
            let theta = fit_logistic(&obj, p, vec![0.0; x.n_cols() + 1])?;
            let (w, b) = theta.split_at(x.n_cols());
            (Some(s), ModelParams::Logistic { weights: w.to_vec(), intercept: b[0] })
        }
        ModelSpec::RbfSvm(p) => {
            let s = Standardizer::fit(x, &feature_names);
            let z = s.apply_matrix(x);
            (Some(s), ModelParams::Svm(svm::train_svm(p, &z, y)?))
        }
    };
    Ok(TrainedModel { spec: *spec, feature_names, training_seed: seed, standardizer, params })
}

/// Train on feature vectors in canonical feature order.
pub fn train_features(spec: &ModelSpec, data: &[FeatureVector], seed: u64) -> Result<TrainedModel> {
    let x = Matrix::from_features(data);
    let y: Vec<bool> = data.iter().map(|v| v.label.is_positive()).collect();
    train(spec, &x, &y, &FEATURE_NAMES, seed)
}

fn logit_clamped(p: f64) -> f64 {
    (p.ln() - (1.0 - p).ln()).clamp(-FOREST_MARGIN_CLAMP, FOREST_MARGIN_CLAMP)
}

impl TrainedModel {
    pub fn name(&self) -> &'static str {
        self.spec.name()
    }

    fn prepare<'a>(&self, x: &'a [f64]) -> std::borrow::Cow<'a, [f64]> {
        match &self.standardizer {
            Some(s) => std::borrow::Cow::Owned(s.apply(x)),
            None => std::borrow::Cow::Borrowed(x),
        }
    }

    /// Raw score: log-odds for trees and logistic regression, decision
    /// function units for the SVM.
    pub fn margin_row(&self, x: &[f64]) -> f64 {
        let z = self.prepare(x);
        match &self.params {
            ModelParams::Forest { trees } => logit_clamped(forest::forest_fraction(trees, &z)),
            ModelParams::Boost { base_margin, trees } => base_margin + trees.iter().map(|t| t.predict(&z)).sum::<f64>(),
            ModelParams::Logistic { weights, intercept } => {
                intercept + weights.iter().zip(z.iter()).map(|(w, v)| w * v).sum::<f64>()
            }
            ModelParams::Svm(m) => m.decision(&z),
        }
    }

    /// Probability of the positive class.
    pub fn proba_row(&self, x: &[f64]) -> f64 {
        match &self.params {
            ModelParams::Forest { trees } => forest::forest_fraction(trees, x),
            ModelParams::Svm(m) => m.probability(self.margin_row(x)),
            _ => sigmoid(self.margin_row(x)),
        }
    }

    fn check_order(&self) -> Result<()> {
        if self.feature_names.iter().map(String::as_str).ne(FEATURE_NAMES.iter().copied()) {
            return Err(Error::FeatureOrder {
                expected: self.feature_names.clone(),
                found: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            });
        }
        Ok(())
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<f64> {
        self.check_order()?;
        Ok(self.proba_row(&x.values))
    }

    pub fn margin(&self, x: &FeatureVector) -> Result<f64> {
        self.check_order()?;
        Ok(self.margin_row(&x.values))
    }

    /// Scores in input order, computed in parallel.
    pub fn predict_proba_all(&self, data: &[FeatureVector]) -> Result<Vec<f64>> {
        use rayon::prelude::*;
        self.check_order()?;
        Ok(data.par_iter().map(|v| self.proba_row(&v.values)).collect())
    }

    /// Trees of a tree ensemble.
    pub fn trees(&self) -> Option<&[Tree]> {
        match &self.params {
            ModelParams::Forest { trees } | ModelParams::Boost { trees, .. } => Some(trees),
            _ => None,
        }
    }
}
