//! Built-in classifiers and the cross-validated F1 evaluator used for every trial.

mod knn;
mod linear;
mod naive_bayes;
mod tree;
mod validation;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{ErrorCode, Rejection, Result};
use crate::space::Configuration;

pub use knn::{DistanceMetric, VoteWeights};
pub use linear::Penalty;
pub use tree::{Criterion, ForestParams};
pub use validation::{
    cross_val_f1, f1_binary, f1_macro, f1_score, stratified_folds, EvalResult, EvalStatus,
    FoldPlan,
};

/// A fully specified model: algorithm, categorical choices and numeric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm")]
pub enum ModelSpec {
    #[serde(rename = "KNN")]
    Knn {
        n_neighbors: usize,
        weights: VoteWeights,
        metric: DistanceMetric,
    },
    DecisionTree {
        criterion: Criterion,
        max_depth: usize,
        min_samples_split: usize,
    },
    RandomForest(ForestParams),
    ExtraTrees(ForestParams),
    #[serde(rename = "SGDLogistic")]
    SgdLogistic {
        penalty: Penalty,
        learning_rate: f64,
        alpha: f64,
        epochs: usize,
    },
    #[serde(rename = "GaussianNB")]
    GaussianNb { var_smoothing: f64 },
}

fn param(config: &Configuration, name: &str) -> Result<f64> {
    config.get(name).copied().ok_or_else(|| {
        Rejection::new(ErrorCode::ConfigMismatch, format!("missing hyperparameter {name}"))
    })
}

fn count(config: &Configuration, name: &str) -> Result<usize> {
    Ok(param(config, name)?.round().max(0.0) as usize)
}

fn choice<'a>(assignment: &'a IndexMap<String, String>, name: &str) -> Result<&'a str> {
    assignment.get(name).map(String::as_str).ok_or_else(|| {
        Rejection::new(ErrorCode::ConfigMismatch, format!("missing categorical {name}"))
    })
}

fn bad_choice(name: &str, value: &str) -> Rejection {
    Rejection::new(ErrorCode::ConfigMismatch, format!("unsupported {name}={value}"))
}

impl ModelSpec {
    /// Resolves a registry algorithm name plus hyperparameters into a model.
    pub fn build(
        algorithm: &str,
        assignment: &IndexMap<String, String>,
        config: &Configuration,
    ) -> Result<ModelSpec> {
        let criterion = || match choice(assignment, "criterion")? {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            other => Err(bad_choice("criterion", other)),
        };
        let forest = || -> Result<ForestParams> {
            Ok(ForestParams {
                criterion: criterion()?,
                n_trees: count(config, "n_trees")?.max(1),
                max_features: param(config, "max_features")?,
                max_depth: count(config, "max_depth")?,
                bootstrap: true,
            })
        };
        Ok(match algorithm {
            "KNN" => ModelSpec::Knn {
                n_neighbors: count(config, "n_neighbors")?.max(1),
                weights: match choice(assignment, "weights")? {
                    "uniform" => VoteWeights::Uniform,
                    "distance" => VoteWeights::Distance,
                    other => return Err(bad_choice("weights", other)),
                },
                metric: match choice(assignment, "metric")? {
                    "euclidean" => DistanceMetric::Euclidean,
                    "manhattan" => DistanceMetric::Manhattan,
                    other => return Err(bad_choice("metric", other)),
                },
            },
            "DecisionTree" => ModelSpec::DecisionTree {
                criterion: criterion()?,
                max_depth: count(config, "max_depth")?,
                min_samples_split: count(config, "min_samples_split")?.max(2),
            },
            "RandomForest" => ModelSpec::RandomForest(forest()?),
            "ExtraTrees" => ModelSpec::ExtraTrees(ForestParams {
                bootstrap: false,
                ..forest()?
            }),
            "SGDLogistic" => ModelSpec::SgdLogistic {
                penalty: match choice(assignment, "penalty")? {
                    "l1" => Penalty::L1,
                    "l2" => Penalty::L2,
                    "none" => Penalty::None,
                    other => return Err(bad_choice("penalty", other)),
                },
                learning_rate: param(config, "learning_rate")?,
                alpha: param(config, "alpha")?,
                epochs: count(config, "epochs")?.max(1),
            },
            "GaussianNB" => ModelSpec::GaussianNb {
                var_smoothing: param(config, "var_smoothing")?,
            },
            other => {
                return Err(Rejection::new(
                    ErrorCode::UnknownAlgorithm,
                    format!("no built-in classifier named {other}"),
                ))
            }
        })
    }
}

/// Training data for one fit: rows, label indices and the class count.
#[derive(Debug, Clone, Copy)]
pub struct TrainSet<'a> {
    pub rows: &'a [Vec<f64>],
    pub labels: &'a [usize],
    pub n_classes: usize,
}

/// Fits `spec` on `train` and predicts every row of `test`.
///
/// Deterministic in all inputs including `seed`. Numeric failures come back as
/// `Err` with a message, never as a panic.
pub fn train_predict(
    spec: &ModelSpec,
    train: TrainSet<'_>,
    test: &[Vec<f64>],
    seed: u64,
) -> Result<Vec<usize>, String> {
    if train.rows.is_empty() {
        return Err("empty training set".into());
    }
    match spec {
        ModelSpec::Knn {
            n_neighbors,
            weights,
            metric,
        } => {
            let scaler = Standardizer::fit(train.rows);
            let x = scaler.transform_all(train.rows);
            let q = scaler.transform_all(test);
            Ok(knn::predict(&x, train.labels, train.n_classes, &q, *n_neighbors, *weights, *metric))
        }
        ModelSpec::DecisionTree {
            criterion,
            max_depth,
            min_samples_split,
        } => {
            let params = tree::TreeParams {
                criterion: *criterion,
                max_depth: *max_depth,
                min_samples_split: *min_samples_split,
                max_features: None,
                random_thresholds: false,
            };
            let model = tree::Tree::fit(train, &params, seed);
            Ok(test.iter().map(|r| model.predict(r)).collect())
        }
        ModelSpec::RandomForest(p) => {
            Ok(tree::Forest::fit(train, p, false, seed).predict_all(test))
        }
        ModelSpec::ExtraTrees(p) => Ok(tree::Forest::fit(train, p, true, seed).predict_all(test)),
        ModelSpec::SgdLogistic {
            penalty,
            learning_rate,
            alpha,
            epochs,
        } => {
            let scaler = Standardizer::fit(train.rows);
            let x = scaler.transform_all(train.rows);
            let model = linear::SoftmaxSgd::fit(
                &x,
                train.labels,
                train.n_classes,
                linear::SgdParams {
                    penalty: *penalty,
                    learning_rate: *learning_rate,
                    alpha: *alpha,
                    epochs: *epochs,
                },
                seed,
            )?;
            Ok(scaler.transform_all(test).iter().map(|r| model.predict(r)).collect())
        }
        ModelSpec::GaussianNb { var_smoothing } => {
            let scaler = Standardizer::fit(train.rows);
            let x = scaler.transform_all(train.rows);
            let model = naive_bayes::GaussianNb::fit(&x, train.labels, train.n_classes, *var_smoothing)?;
            Ok(scaler.transform_all(test).iter().map(|r| model.predict(r)).collect())
        }
    }
}

/// Per-feature z-scoring with statistics from the training rows only.
#[derive(Debug, Clone)]
pub(crate) struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub(crate) fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    pub(crate) fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub(crate) fn transform_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

/// Index of the largest vote; ties go to the lowest class index.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
