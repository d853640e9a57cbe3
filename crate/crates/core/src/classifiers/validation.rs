//! Stratified k-fold plans, F1 scoring and cross-validated evaluation.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train_predict, ModelSpec, TrainSet};
use crate::data::Dataset;
use crate::error::{ErrorCode, Rejection, Result};
use crate::seed::mix_seed;

/// Fold index for every row of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// The fold count asked for; larger than `k` when the smallest class forced a reduction.
    pub requested_k: usize,
    pub seed: u64,
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}

/// Seeded shuffle within each class, then round-robin over folds.
///
/// `k` drops to the smallest class size (never below 2) so that every fold
/// leaves each class represented in its training portion.
pub fn stratified_folds(ds: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    let n = ds.n();
    if k < 2 || k > n {
        return Err(Rejection::new(
            ErrorCode::InvalidMetric,
            format!("fold count {k} must lie in [2, {n}]"),
        ));
    }
    let smallest = ds.class_counts().into_iter().min().unwrap_or(0);
    let effective = k.min(smallest.max(2));
    let mut assignment = vec![0; n];
    let mut offset = 0;
    for class in 0..ds.n_classes() {
        let mut members: Vec<usize> = (0..n).filter(|&i| ds.labels[i] == class).collect();
        members.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, class as u64)));
        for (j, &row) in members.iter().enumerate() {
            assignment[row] = (offset + j) % effective;
        }
        offset += members.len();
    }
    Ok(FoldPlan {
        k: effective,
        requested_k: k,
        seed,
        assignment,
    })
}

/// Binary F1 for `positive`: `2TP / (2TP + FP + FN)`, zero when TP is zero.
pub fn f1_binary<T: PartialEq>(y_true: &[T], y_pred: &[T], positive: &T) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (t, p) in y_true.iter().zip(y_pred) {
        match (t == positive, p == positive) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    (2 * tp) as f64 / (2 * tp + fp + fn_) as f64
}

/// Unweighted mean of per-class F1 over classes seen in either list.
pub fn f1_macro(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> f64 {
    let seen: Vec<usize> = (0..n_classes)
        .filter(|c| y_true.contains(c) || y_pred.contains(c))
        .collect();
    if seen.is_empty() {
        return 0.0;
    }
    seen.iter().map(|c| f1_binary(y_true, y_pred, c)).sum::<f64>() / seen.len() as f64
}

/// Binary F1 on `positive` for two classes, macro F1 otherwise.
pub fn f1_score(y_true: &[usize], y_pred: &[usize], n_classes: usize, positive: usize) -> f64 {
    if n_classes <= 2 {
        f1_binary(y_true, y_pred, &positive)
    } else {
        f1_macro(y_true, y_pred, n_classes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "message")]
pub enum EvalStatus {
    Ok,
    Error(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
    pub elapsed: Duration,
    pub status: EvalStatus,
}

impl EvalResult {
    pub fn is_ok(&self) -> bool {
        self.status == EvalStatus::Ok
    }
}

fn gather(ds: &Dataset, rows: &[usize]) -> (Vec<Vec<f64>>, Vec<usize>) {
    rows.iter()
        .map(|&i| (ds.features[i].clone(), ds.labels[i]))
        .unzip()
}

/// Trains on each fold's complement and scores F1 on the fold.
///
/// Folds run in parallel; results are independent of thread scheduling. If any
/// fold fails the whole evaluation is an error naming that fold.
pub fn cross_val_f1(ds: &Dataset, spec: &ModelSpec, plan: &FoldPlan, seed: u64) -> EvalResult {
    let started = Instant::now();
    let outcomes: Vec<Result<f64, String>> = (0..plan.k)
        .into_par_iter()
        .map(|fold| {
            let (train_x, train_y) = gather(ds, &plan.train_rows(fold));
            let (test_x, test_y) = gather(ds, &plan.test_rows(fold));
            let train = TrainSet {
                rows: &train_x,
                labels: &train_y,
                n_classes: ds.n_classes(),
            };
            let fold_seed = mix_seed(seed, fold as u64);
            let predicted = catch_unwind(AssertUnwindSafe(|| {
                train_predict(spec, train, &test_x, fold_seed)
            }))
            .unwrap_or_else(|_| Err("classifier panicked".into()))?;
            Ok(f1_score(&test_y, &predicted, ds.n_classes(), ds.positive_class))
        })
        .collect();
    let elapsed = started.elapsed();
    let mut fold_scores = Vec::with_capacity(plan.k);
    for (fold, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(score) => fold_scores.push(score),
            Err(message) => {
                return EvalResult {
                    fold_scores: Vec::new(),
                    mean_score: 0.0,
                    elapsed,
                    status: EvalStatus::Error(format!("fold {fold}: {message}")),
                }
            }
        }
    }
    let mean_score = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
    EvalResult {
        fold_scores,
        mean_score,
        elapsed,
        status: EvalStatus::Ok,
    }
}
