//! Aggregates behind the overview panel and the three-level profiler.
//!
//! Every function here is a pure function of a trial list and a search space.
//! Failed trials count toward `n_trials` and `n_errors` but never toward any
//! score aggregate.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{ErrorCode, Rejection, Result};
use crate::orchestrator::Trial;
use crate::space::{HyperparameterSpec, Interval, Scale, SearchSpace};

pub const SCORE_BINS: usize = 10;
pub const VALUE_BINS: usize = 20;
pub const DEFAULT_TOP_K: usize = 10;

/// Bin of `value` among `bins` equal-width bins over `[lo, hi]`. Bins are
/// half-open except the last, which is closed; values outside are clamped.
pub fn bin_index(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let edge = |k: usize| lo + (hi - lo) * k as f64 / bins as f64;
    if value.is_nan() || value <= lo || hi <= lo {
        return 0;
    }
    if value >= hi {
        return bins - 1;
    }
    let mut idx = (((value - lo) / (hi - lo)) * bins as f64).floor() as usize;
    idx = idx.min(bins - 1);
    // floor on a scaled value can land one bin off next to an edge
    while idx > 0 && value < edge(idx) {
        idx -= 1;
    }
    while idx + 1 < bins && value >= edge(idx + 1) {
        idx += 1;
    }
    idx
}

/// Ten-bin histogram of scores over `[0, 1]`.
pub fn histogram(scores: &[f64]) -> [u64; SCORE_BINS] {
    let mut bins = [0; SCORE_BINS];
    for &s in scores {
        bins[bin_index(s, 0.0, 1.0, SCORE_BINS)] += 1;
    }
    bins
}

fn ok_scores<'a>(trials: impl IntoIterator<Item = &'a Trial>) -> Vec<f64> {
    trials.into_iter().filter_map(|t| t.score.filter(|_| t.is_ok())).collect()
}

fn best(scores: &[f64]) -> Option<f64> {
    scores.iter().copied().reduce(f64::max)
}

fn ratio(hit: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopModel {
    pub rank: usize,
    pub trial_id: u64,
    pub algorithm: String,
    pub hyperpartition_id: String,
    pub score: f64,
}

/// Best `k` ok trials by score, ties broken by the earlier trial.
pub fn top_models(trials: &[Trial], k: usize) -> Vec<TopModel> {
    let mut ok: Vec<(&Trial, f64)> = trials
        .iter()
        .filter(|t| t.is_ok())
        .filter_map(|t| t.score.map(|s| (t, s)))
        .collect();
    ok.sort_by(|(a, sa), (b, sb)| sb.total_cmp(sa).then(a.trial_id.cmp(&b.trial_id)));
    ok.into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (t, score))| TopModel {
            rank: i + 1,
            trial_id: t.trial_id,
            algorithm: t.algorithm.clone(),
            hyperpartition_id: t.hyperpartition_id.clone(),
            score,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overview {
    pub best_score: Option<f64>,
    pub n_trials: usize,
    pub n_ok: usize,
    pub n_errors: usize,
    pub algorithm_coverage: f64,
    pub hyperpartition_coverage: f64,
    pub histogram: [u64; SCORE_BINS],
    pub top_models: Vec<TopModel>,
}

pub fn overview(trials: &[Trial], space: &SearchSpace, top_k: usize) -> Overview {
    let scores = ok_scores(trials);
    let tried_algorithms: BTreeSet<&str> =
        trials.iter().filter(|t| t.is_ok()).map(|t| t.algorithm.as_str()).collect();
    let tried_hps: BTreeSet<&str> =
        trials.iter().filter(|t| t.is_ok()).map(|t| t.hyperpartition_id.as_str()).collect();
    let enabled_algorithms = space.enabled_algorithms();
    let enabled_hps = space.enabled_hyperpartitions();
    Overview {
        best_score: best(&scores),
        n_trials: trials.len(),
        n_ok: scores.len(),
        n_errors: trials.len() - scores.len(),
        algorithm_coverage: ratio(
            enabled_algorithms.iter().filter(|a| tried_algorithms.contains(a.name.as_str())).count(),
            enabled_algorithms.len(),
        ),
        hyperpartition_coverage: ratio(
            enabled_hps.iter().filter(|h| tried_hps.contains(h.id.as_str())).count(),
            enabled_hps.len(),
        ),
        histogram: histogram(&scores),
        top_models: top_models(trials, top_k),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub name: String,
    pub enabled: bool,
    pub best_score: Option<f64>,
    pub n_trials: usize,
    pub n_errors: usize,
    pub histogram: [u64; SCORE_BINS],
    /// Share of this algorithm's enabled hyperpartitions with an ok trial.
    pub hyperpartition_coverage: f64,
}

/// One entry per algorithm in the space, best first; untried ones last by name.
pub fn algorithm_summaries(trials: &[Trial], space: &SearchSpace) -> Vec<AlgorithmSummary> {
    let enabled_hps = space.enabled_hyperpartitions();
    let mut out: Vec<AlgorithmSummary> = space
        .algorithms
        .iter()
        .map(|alg| {
            let own: Vec<&Trial> = trials.iter().filter(|t| t.algorithm == alg.name).collect();
            let scores = ok_scores(own.iter().copied());
            let tried: BTreeSet<&str> =
                own.iter().filter(|t| t.is_ok()).map(|t| t.hyperpartition_id.as_str()).collect();
            let hps: Vec<_> = enabled_hps.iter().filter(|h| h.algorithm == alg.name).collect();
            AlgorithmSummary {
                name: alg.name.clone(),
                enabled: space.is_algorithm_enabled(&alg.name),
                best_score: best(&scores),
                n_trials: own.len(),
                n_errors: own.len() - scores.len(),
                histogram: histogram(&scores),
                hyperpartition_coverage: ratio(
                    hps.iter().filter(|h| tried.contains(h.id.as_str())).count(),
                    hps.len(),
                ),
            }
        })
        .collect();
    out.sort_by(|a, b| match (a.best_score, b.best_score) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.name.cmp(&b.name)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.name.cmp(&b.name),
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePoint {
    pub trial_id: u64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperpartitionSummary {
    pub id: String,
    pub algorithm: String,
    pub enabled: bool,
    pub n_trials: usize,
    pub n_errors: usize,
    pub best_score: Option<f64>,
    /// Ok trials in trial order.
    pub sequence: Vec<SequencePoint>,
}

/// Summaries for every hyperpartition, or only those of `algorithm`, in
/// declaration order.
pub fn hyperpartition_summaries(
    trials: &[Trial],
    space: &SearchSpace,
    algorithm: Option<&str>,
) -> Result<Vec<HyperpartitionSummary>> {
    if let Some(name) = algorithm {
        if space.algorithm(name).is_none() {
            return Err(unknown_name(format!("unknown algorithm {name}")));
        }
    }
    Ok(space
        .hyperpartitions()
        .into_iter()
        .filter(|hp| algorithm.is_none_or(|a| hp.algorithm == a))
        .map(|hp| {
            let own: Vec<&Trial> = trials.iter().filter(|t| t.hyperpartition_id == hp.id).collect();
            let mut sequence: Vec<SequencePoint> = own
                .iter()
                .filter(|t| t.is_ok())
                .filter_map(|t| t.score.map(|score| SequencePoint { trial_id: t.trial_id, score }))
                .collect();
            sequence.sort_by_key(|p| p.trial_id);
            let scores: Vec<f64> = sequence.iter().map(|p| p.score).collect();
            HyperpartitionSummary {
                enabled: space.is_enabled(&hp),
                algorithm: hp.algorithm,
                id: hp.id,
                n_trials: own.len(),
                n_errors: own.len() - scores.len(),
                best_score: best(&scores),
                sequence,
            }
        })
        .collect())
}

fn unknown_name(message: String) -> Rejection {
    Rejection::new(ErrorCode::UnknownName, message)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub value: f64,
    pub score: f64,
    pub trial_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterSeries {
    pub scope: String,
    pub hyperparameter: String,
    pub scale: Scale,
    pub declared: Interval,
    /// Active range under the current space, when the scope is a single hyperpartition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<Interval>,
    pub points: Vec<ScatterPoint>,
    pub value_histogram: [u64; VALUE_BINS],
}

fn value_bin(spec: &HyperparameterSpec, value: f64) -> usize {
    let range = spec.declared();
    match spec.scale {
        Scale::Linear => bin_index(value, range.lo(), range.hi(), VALUE_BINS),
        Scale::Log => bin_index(value.log10(), range.lo().log10(), range.hi().log10(), VALUE_BINS),
    }
}

/// Value/score pairs for one hyperparameter. `scope` is an algorithm name,
/// which merges every hyperpartition carrying the hyperparameter, or a
/// hyperpartition id.
pub fn scatter(trials: &[Trial], space: &SearchSpace, scope: &str, hyperparameter: &str) -> Result<ScatterSeries> {
    let hps: Vec<_> = match space.hyperpartition(scope) {
        Some(hp) => vec![hp],
        None if space.algorithm(scope).is_some() => space
            .hyperpartitions()
            .into_iter()
            .filter(|hp| hp.algorithm == scope)
            .collect(),
        None => return Err(unknown_name(format!("unknown algorithm or hyperpartition {scope}"))),
    };
    let carriers: Vec<_> = hps.iter().filter(|hp| hp.tunable(hyperparameter).is_some()).collect();
    let Some(spec) = carriers.first().and_then(|hp| hp.tunable(hyperparameter)).cloned() else {
        return Err(unknown_name(format!("{scope} has no tunable hyperparameter {hyperparameter}")));
    };
    let ids: BTreeSet<&str> = carriers.iter().map(|hp| hp.id.as_str()).collect();
    let mut points = Vec::new();
    let mut value_histogram = [0; VALUE_BINS];
    for t in trials.iter().filter(|t| t.is_ok() && ids.contains(t.hyperpartition_id.as_str())) {
        if let (Some(&value), Some(score)) = (t.config.get(hyperparameter), t.score) {
            value_histogram[value_bin(&spec, value)] += 1;
            points.push(ScatterPoint { value, score, trial_id: t.trial_id });
        }
    }
    let active = (hps.len() == 1).then(|| space.active_interval(&hps[0].id, &spec));
    Ok(ScatterSeries {
        scope: scope.to_string(),
        hyperparameter: hyperparameter.to_string(),
        scale: spec.scale,
        declared: spec.declared(),
        active,
        points,
        value_histogram,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Focus {
    pub algorithms: BTreeSet<String>,
    pub hyperpartitions: BTreeSet<String>,
}

/// Algorithms and hyperpartitions owning at least one of the top `k` models.
pub fn focus_filter(trials: &[Trial], top_k: usize) -> Focus {
    let top = top_models(trials, top_k);
    Focus {
        algorithms: top.iter().map(|m| m.algorithm.clone()).collect(),
        hyperpartitions: top.iter().map(|m| m.hyperpartition_id.clone()).collect(),
    }
}

/// Overview plus both profiler levels; what a dashboard refresh needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullSummary {
    pub overview: Overview,
    pub algorithms: Vec<AlgorithmSummary>,
    pub hyperpartitions: Vec<HyperpartitionSummary>,
    pub focus: Focus,
}

pub fn full_summary(trials: &[Trial], space: &SearchSpace, top_k: usize) -> FullSummary {
    FullSummary {
        overview: overview(trials, space, top_k),
        algorithms: algorithm_summaries(trials, space),
        hyperpartitions: hyperpartition_summaries(trials, space, None).expect("no filter"),
        focus: focus_filter(trials, top_k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::TrialStatus;
    use crate::space::{Configuration, SpaceDelta};
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn trial(id: u64, hp: &str, score: Option<f64>, config: Configuration) -> Trial {
        Trial {
            trial_id: id,
            run_id: "run-1".into(),
            algorithm: hp.split(':').next().unwrap().into(),
            hyperpartition_id: hp.into(),
            config,
            score,
            fold_scores: score.into_iter().collect(),
            status: if score.is_some() { TrialStatus::Ok } else { TrialStatus::Error },
            error: score.is_none().then(|| "boom".into()),
            elapsed_secs: 0.0,
            created_at: Utc.timestamp_opt(0, 0).unwrap(),
            space_version: 0,
            seed: id,
        }
    }

    fn nb(id: u64, score: f64) -> Trial {
        trial(id, "GaussianNB", Some(score), [("var_smoothing".to_string(), 1e-9)].into())
    }

    #[test]
    fn histogram_rules() {
        let h = histogram(&[0.95, 0.92, 0.31]);
        let mut want = [0; 10];
        want[9] = 2;
        want[3] = 1;
        assert_eq!(h, want);
        assert_eq!(histogram(&[1.0])[9], 1);
        assert_eq!(histogram(&[0.3])[3], 1);
        assert_eq!(histogram(&[0.0])[0], 1);
        for k in 0..10 {
            let edge = k as f64 / 10.0;
            assert_eq!(bin_index(edge, 0.0, 1.0, 10), k, "edge {edge}");
        }
    }

    #[test]
    fn empty_overview() {
        let o = overview(&[], &SearchSpace::builtin(), 10);
        assert_eq!(o.best_score, None);
        assert_eq!(o.algorithm_coverage, 0.0);
        assert_eq!(o.histogram, [0; 10]);
        assert!(o.top_models.is_empty());
    }

    #[test]
    fn coverage_counts_enabled_only() {
        let space = SearchSpace::builtin();
        let trials = vec![
            nb(1, 0.5),
            trial(2, "KNN:weights=uniform,metric=euclidean", Some(0.6), [("n_neighbors".to_string(), 3.0)].into()),
            trial(3, "DecisionTree:criterion=gini", Some(0.7), Configuration::new()),
            trial(4, "RandomForest:criterion=gini", None, Configuration::new()),
        ];
        let o = overview(&trials, &space, 10);
        assert_eq!(o.algorithm_coverage, 0.5);
        assert!((o.hyperpartition_coverage - 3.0 / 14.0).abs() < 1e-15);
        assert_eq!((o.n_ok, o.n_errors), (3, 1));
        let narrowed = space
            .apply_deltas(&[SpaceDelta::disable_algorithm("RandomForest"), SpaceDelta::disable_algorithm("ExtraTrees")])
            .unwrap();
        assert_eq!(overview(&trials, &narrowed, 10).algorithm_coverage, 0.75);
    }

    #[test]
    fn top_models_ties_prefer_earlier() {
        let trials = vec![nb(1, 0.8), nb(2, 0.9), nb(3, 0.8), nb(4, 0.95)];
        let ids: Vec<u64> = top_models(&trials, 3).iter().map(|m| m.trial_id).collect();
        assert_eq!(ids, [4, 2, 1]);
        assert_eq!(top_models(&trials, 3)[0].rank, 1);
    }

    #[test]
    fn algorithm_order() {
        let trials = vec![
            trial(1, "DecisionTree:criterion=gini", Some(0.88), Configuration::new()),
            trial(2, "KNN:weights=uniform,metric=euclidean", Some(0.91), Configuration::new()),
        ];
        let names: Vec<String> = algorithm_summaries(&trials, &SearchSpace::builtin()).into_iter().map(|a| a.name).collect();
        assert_eq!(
            names,
            ["KNN", "DecisionTree", "ExtraTrees", "GaussianNB", "RandomForest", "SGDLogistic"]
        );
    }

    #[test]
    fn hyperpartition_sequence() {
        let trials = vec![nb(1, 0.83), nb(4, 0.91), nb(9, 0.94)];
        let s = hyperpartition_summaries(&trials, &SearchSpace::builtin(), Some("GaussianNB")).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].best_score, Some(0.94));
        let seq: Vec<(u64, f64)> = s[0].sequence.iter().map(|p| (p.trial_id, p.score)).collect();
        assert_eq!(seq, [(1, 0.83), (4, 0.91), (9, 0.94)]);
        let err = hyperpartition_summaries(&trials, &SearchSpace::builtin(), Some("SVM")).unwrap_err();
        assert_eq!(err.code, ErrorCode::UnknownName);
    }

    #[test]
    fn scatter_scopes() {
        let space = SearchSpace::builtin();
        let k = |id, hp, n: f64| trial(id, hp, Some(0.5), [("n_neighbors".to_string(), n)].into());
        let trials = vec![
            k(1, "KNN:weights=uniform,metric=euclidean", 1.0),
            k(2, "KNN:weights=distance,metric=manhattan", 30.0),
            k(3, "KNN:weights=distance,metric=manhattan", 15.0),
        ];
        let all = scatter(&trials, &space, "KNN", "n_neighbors").unwrap();
        assert_eq!(all.points.len(), 3);
        assert_eq!(all.value_histogram.iter().sum::<u64>(), 3);
        assert_eq!(all.value_histogram[0], 1);
        assert_eq!(all.value_histogram[19], 1);
        assert_eq!(all.active, None);
        let one = scatter(&trials, &space, "KNN:weights=distance,metric=manhattan", "n_neighbors").unwrap();
        assert_eq!(one.points.len(), 2);
        assert_eq!(one.active, Some(Interval(1.0, 30.0)));
        assert_eq!(scatter(&trials, &space, "KNN", "max_depth").unwrap_err().code, ErrorCode::UnknownName);
        assert_eq!(scatter(&trials, &space, "SVM", "C").unwrap_err().code, ErrorCode::UnknownName);
    }

    #[test]
    fn log_scatter_bins() {
        let space = SearchSpace::builtin();
        let trials: Vec<Trial> = [1e-12, 1e-9, 1e-3]
            .iter()
            .enumerate()
            .map(|(i, &v)| trial(i as u64 + 1, "GaussianNB", Some(0.5), [("var_smoothing".to_string(), v)].into()))
            .collect();
        let s = scatter(&trials, &space, "GaussianNB", "var_smoothing").unwrap();
        // declared range spans 9 decades; 1e-9 sits a third of the way up
        assert_eq!(s.value_histogram[0], 1);
        assert_eq!(s.value_histogram[6], 1);
        assert_eq!(s.value_histogram[19], 1);
    }

    #[test]
    fn focus_sets() {
        let trials = vec![
            nb(1, 0.5),
            trial(2, "DecisionTree:criterion=gini", Some(0.9), Configuration::new()),
            trial(3, "DecisionTree:criterion=gini", Some(0.8), Configuration::new()),
        ];
        let f = focus_filter(&trials, 2);
        assert_eq!(f.algorithms, BTreeSet::from(["DecisionTree".to_string()]));
        assert_eq!(f.hyperpartitions.len(), 1);
        assert_eq!(focus_filter(&trials, 10).algorithms.len(), 2);
    }

    proptest! {
        #[test]
        fn algorithm_histograms_sum_to_overview(scores in proptest::collection::vec(proptest::option::weighted(0.8, 0.0f64..=1.0), 0..60)) {
            let space = SearchSpace::builtin();
            let hps = space.hyperpartitions();
            let trials: Vec<Trial> = scores
                .iter()
                .enumerate()
                .map(|(i, s)| trial(i as u64 + 1, &hps[i % hps.len()].id, *s, Configuration::new()))
                .collect();
            let o = overview(&trials, &space, 10);
            let algs = algorithm_summaries(&trials, &space);
            let mut sum = [0u64; 10];
            for a in &algs {
                for (s, x) in sum.iter_mut().zip(a.histogram) {
                    *s += x;
                }
            }
            prop_assert_eq!(sum, o.histogram);
            prop_assert_eq!(o.histogram.iter().sum::<u64>() as usize, o.n_ok);
            let best_alg = algs.iter().filter_map(|a| a.best_score).reduce(f64::max);
            prop_assert_eq!(best_alg, o.best_score);
        }

        #[test]
        fn one_more_ok_trial_moves_one_bin(base in proptest::collection::vec(0.0f64..=1.0, 0..30), extra in 0.0f64..=1.0) {
            let space = SearchSpace::builtin();
            let mut trials: Vec<Trial> = base.iter().enumerate().map(|(i, &s)| nb(i as u64 + 1, s)).collect();
            let before = overview(&trials, &space, 10);
            trials.push(nb(trials.len() as u64 + 1, extra));
            let after = overview(&trials, &space, 10);
            prop_assert_eq!(after.n_ok, before.n_ok + 1);
            let diffs: Vec<i64> = after.histogram.iter().zip(before.histogram).map(|(a, b)| *a as i64 - b as i64).collect();
            prop_assert_eq!(diffs.iter().filter(|&&d| d == 1).count(), 1);
            prop_assert_eq!(diffs.iter().filter(|&&d| d != 0).count(), 1);
        }

        #[test]
        fn bins_respect_edges(v in 0.0f64..=1.0) {
            let b = bin_index(v, 0.0, 1.0, 10);
            prop_assert!(b == 9 || v < (b + 1) as f64 / 10.0);
            prop_assert!(v >= b as f64 / 10.0);
        }
    }
}
