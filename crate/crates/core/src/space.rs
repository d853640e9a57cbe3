//! Hierarchical search space. Algorithms split into hyperpartitions, each
//! with tunable numeric ranges.
//!
//! An algorithm declares categorical hyperparameters and numeric ones. Fixing
//! every categorical yields a [`Hyperpartition`]; its numerics are the tunables
//! that the tuner explores inside the *active* range, which the user may narrow
//! with a [`SpaceDelta`] while a run is live.

use std::collections::{BTreeMap, BTreeSet};

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ErrorCode, Rejection, Result};

/// Numeric hyperparameter values keyed by name.
pub type Configuration = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Integer,
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval(pub f64, pub f64);

impl Interval {
    pub fn lo(&self) -> f64 {
        self.0
    }

    pub fn hi(&self) -> f64 {
        self.1
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.0 && value <= self.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterSpec {
    pub name: String,
    pub kind: ParamKind,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub scale: Scale,
    /// Conjunction of categorical assignments under which this numeric is tunable.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub applies_when: BTreeMap<String, String>,
}

impl HyperparameterSpec {
    pub fn integer(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: ParamKind::Integer,
            lower,
            upper,
            scale: Scale::Linear,
            applies_when: BTreeMap::new(),
        }
    }

    pub fn real(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            kind: ParamKind::Real,
            ..Self::integer(name, lower, upper)
        }
    }

    pub fn log_real(name: &str, lower: f64, upper: f64) -> Self {
        Self {
            scale: Scale::Log,
            ..Self::real(name, lower, upper)
        }
    }

    pub fn when(mut self, categorical: &str, value: &str) -> Self {
        self.applies_when
            .insert(categorical.to_string(), value.to_string());
        self
    }

    pub fn declared(&self) -> Interval {
        Interval(self.lower, self.upper)
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lower.is_finite() && self.upper.is_finite()) || self.lower >= self.upper {
            out.push(format!("{}: bounds must satisfy lower < upper", self.name));
        }
        if self.scale == Scale::Log && self.lower <= 0.0 {
            out.push(format!("{}: log scale requires lower > 0", self.name));
        }
        if self.kind == ParamKind::Integer
            && (self.lower.fract() != 0.0 || self.upper.fract() != 0.0 || self.upper - self.lower < 1.0)
        {
            out.push(format!(
                "{}: integer bounds must be whole numbers at least 1 apart",
                self.name
            ));
        }
        out
    }

    /// Intersects `[lo, hi]` with the declared bounds, snapping integer
    /// parameters inward to whole numbers. `None` when nothing is left.
    pub fn clip(&self, lo: f64, hi: f64) -> Option<Interval> {
        let mut lo = lo.max(self.lower);
        let mut hi = hi.min(self.upper);
        if self.kind == ParamKind::Integer {
            lo = (lo - 1e-9).ceil();
            hi = (hi + 1e-9).floor();
        }
        (lo < hi).then_some(Interval(lo, hi))
    }

    fn is_satisfied_by(&self, assignment: &IndexMap<String, String>) -> bool {
        self.applies_when
            .iter()
            .all(|(cat, val)| assignment.get(cat) == Some(val))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalSpec {
    pub name: String,
    pub values: Vec<String>,
}

impl CategoricalSpec {
    pub fn new(name: &str, values: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub name: String,
    #[serde(default)]
    pub categoricals: Vec<CategoricalSpec>,
    #[serde(default)]
    pub numerics: Vec<HyperparameterSpec>,
}

impl AlgorithmSpec {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            categoricals: Vec::new(),
            numerics: Vec::new(),
        }
    }

    pub fn categorical(mut self, name: &str, values: &[&str]) -> Self {
        self.categoricals.push(CategoricalSpec::new(name, values));
        self
    }

    pub fn numeric(mut self, spec: HyperparameterSpec) -> Self {
        self.numerics.push(spec);
        self
    }

    pub fn numeric_spec(&self, name: &str) -> Option<&HyperparameterSpec> {
        self.numerics.iter().find(|n| n.name == name)
    }

    /// Structural problems with this algorithm declaration; empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.name.is_empty() || self.name.contains([':', ',', '=']) {
            out.push(format!("invalid algorithm name {:?}", self.name));
        }
        let mut names = BTreeSet::new();
        for cat in &self.categoricals {
            if !names.insert(cat.name.as_str()) {
                out.push(format!("{}: duplicate name {}", self.name, cat.name));
            }
            if cat.values.is_empty() {
                out.push(format!("{}: categorical {} has no values", self.name, cat.name));
            }
            let distinct: BTreeSet<_> = cat.values.iter().collect();
            if distinct.len() != cat.values.len() {
                out.push(format!("{}: categorical {} repeats a value", self.name, cat.name));
            }
        }
        for num in &self.numerics {
            if !names.insert(num.name.as_str()) {
                out.push(format!("{}: duplicate name {}", self.name, num.name));
            }
            out.extend(num.problems().into_iter().map(|p| format!("{}: {p}", self.name)));
            for (cat, val) in &num.applies_when {
                let declared = self
                    .categoricals
                    .iter()
                    .find(|c| &c.name == cat)
                    .is_some_and(|c| c.values.contains(val));
                if !declared {
                    out.push(format!(
                        "{}: {} applies_when references undeclared {cat}={val}",
                        self.name, num.name
                    ));
                }
            }
        }
        out
    }
}

/// An algorithm with every categorical fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperpartition {
    pub id: String,
    pub algorithm: String,
    pub assignment: IndexMap<String, String>,
    pub tunables: Vec<HyperparameterSpec>,
}

impl Hyperpartition {
    pub fn tunable(&self, name: &str) -> Option<&HyperparameterSpec> {
        self.tunables.iter().find(|t| t.name == name)
    }
}

/// Canonical id: `algorithm:cat1=v1,cat2=v2`, or just the algorithm name when
/// it has no categoricals.
pub fn hyperpartition_id(algorithm: &str, assignment: &IndexMap<String, String>) -> String {
    if assignment.is_empty() {
        return algorithm.to_string();
    }
    let parts: Vec<String> = assignment.iter().map(|(k, v)| format!("{k}={v}")).collect();
    format!("{algorithm}:{}", parts.join(","))
}

/// Cartesian product of the categorical values, last categorical varying fastest.
pub fn enumerate_hyperpartitions(algorithm: &AlgorithmSpec) -> Vec<Hyperpartition> {
    let mut assignments: Vec<IndexMap<String, String>> = vec![IndexMap::new()];
    for cat in &algorithm.categoricals {
        assignments = assignments
            .into_iter()
            .flat_map(|prefix| {
                cat.values.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.insert(cat.name.clone(), v.clone());
                    next
                })
            })
            .collect();
    }
    assignments
        .into_iter()
        .map(|assignment| Hyperpartition {
            id: hyperpartition_id(&algorithm.name, &assignment),
            algorithm: algorithm.name.clone(),
            tunables: algorithm
                .numerics
                .iter()
                .filter(|n| n.is_satisfied_by(&assignment))
                .cloned()
                .collect(),
            assignment,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, code: ErrorCode, message: impl Into<String>) {
        self.violations.push(Violation {
            code,
            message: message.into(),
        });
    }

    /// Converts to a rejection carrying the first code and the full report as detail.
    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(first) => {
                let detail = serde_json::to_value(&self).unwrap_or_default();
                Err(Rejection::new(first.code, first.message.clone()).with_detail(detail))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaKind {
    EnableAlgorithm,
    DisableAlgorithm,
    EnableHyperpartition,
    DisableHyperpartition,
    SetRange,
    ResetRange,
}

/// One in-situ edit of the search space.
///
/// `target` names an algorithm or a hyperpartition id. Range edits also name
/// the `hyperparameter`; an algorithm target applies the edit to every
/// hyperpartition of that algorithm carrying the hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDelta {
    pub kind: DeltaKind,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyperparameter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<Interval>,
}

impl SpaceDelta {
    pub fn enable_algorithm(name: &str) -> Self {
        Self::flag(DeltaKind::EnableAlgorithm, name)
    }

    pub fn disable_algorithm(name: &str) -> Self {
        Self::flag(DeltaKind::DisableAlgorithm, name)
    }

    pub fn enable_hyperpartition(id: &str) -> Self {
        Self::flag(DeltaKind::EnableHyperpartition, id)
    }

    pub fn disable_hyperpartition(id: &str) -> Self {
        Self::flag(DeltaKind::DisableHyperpartition, id)
    }

    pub fn set_range(target: &str, hyperparameter: &str, lo: f64, hi: f64) -> Self {
        Self {
            kind: DeltaKind::SetRange,
            target: target.to_string(),
            hyperparameter: Some(hyperparameter.to_string()),
            range: Some(Interval(lo, hi)),
        }
    }

    pub fn reset_range(target: &str, hyperparameter: &str) -> Self {
        Self {
            kind: DeltaKind::ResetRange,
            target: target.to_string(),
            hyperparameter: Some(hyperparameter.to_string()),
            range: None,
        }
    }

    fn flag(kind: DeltaKind, target: &str) -> Self {
        Self {
            kind,
            target: target.to_string(),
            hyperparameter: None,
            range: None,
        }
    }
}

/// The full search space plus the user's enable flags and range restrictions.
///
/// Only restricted ranges are stored in `active_range`; a range equal to the
/// declared bounds is represented by absence, which keeps the JSON canonical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub algorithms: Vec<AlgorithmSpec>,
    pub algorithm_enabled: BTreeMap<String, bool>,
    pub hyperpartition_enabled: BTreeMap<String, bool>,
    #[serde(default)]
    pub active_range: BTreeMap<String, BTreeMap<String, Interval>>,
}

impl SearchSpace {
    /// Builds a space with everything enabled and full ranges.
    pub fn new(algorithms: Vec<AlgorithmSpec>) -> Result<Self> {
        let problems: Vec<String> = algorithms.iter().flat_map(|a| a.problems()).collect();
        if !problems.is_empty() {
            return Err(Rejection::new(ErrorCode::InvalidSpec, problems.join("; ")));
        }
        let names: BTreeSet<_> = algorithms.iter().map(|a| a.name.as_str()).collect();
        if names.len() != algorithms.len() {
            return Err(Rejection::new(ErrorCode::InvalidSpec, "duplicate algorithm name"));
        }
        let algorithm_enabled = algorithms.iter().map(|a| (a.name.clone(), true)).collect();
        let hyperpartition_enabled = algorithms
            .iter()
            .flat_map(enumerate_hyperpartitions)
            .map(|hp| (hp.id, true))
            .collect();
        Ok(Self {
            algorithms,
            algorithm_enabled,
            hyperpartition_enabled,
            active_range: BTreeMap::new(),
        })
    }

    /// The built-in six-algorithm, fourteen-hyperpartition space.
    pub fn builtin() -> Self {
        let criterion = ["gini", "entropy"];
        let forest = |name: &str| {
            AlgorithmSpec::new(name)
                .categorical("criterion", &criterion)
                .numeric(HyperparameterSpec::integer("n_trees", 5.0, 100.0))
                .numeric(HyperparameterSpec::real("max_features", 0.1, 1.0))
                .numeric(HyperparameterSpec::integer("max_depth", 1.0, 20.0))
        };
        let algorithms = vec![
            AlgorithmSpec::new("KNN")
                .categorical("weights", &["uniform", "distance"])
                .categorical("metric", &["euclidean", "manhattan"])
                .numeric(HyperparameterSpec::integer("n_neighbors", 1.0, 30.0)),
            AlgorithmSpec::new("DecisionTree")
                .categorical("criterion", &criterion)
                .numeric(HyperparameterSpec::integer("max_depth", 1.0, 20.0))
                .numeric(HyperparameterSpec::integer("min_samples_split", 2.0, 20.0)),
            forest("RandomForest"),
            forest("ExtraTrees"),
            AlgorithmSpec::new("SGDLogistic")
                .categorical("penalty", &["l1", "l2", "none"])
                .numeric(HyperparameterSpec::log_real("learning_rate", 1e-4, 1e-1))
                .numeric(HyperparameterSpec::log_real("alpha", 1e-6, 1e-1))
                .numeric(HyperparameterSpec::integer("epochs", 5.0, 100.0)),
            AlgorithmSpec::new("GaussianNB")
                .numeric(HyperparameterSpec::log_real("var_smoothing", 1e-12, 1e-3)),
        ];
        Self::new(algorithms).expect("built-in space is valid")
    }

    pub fn algorithm(&self, name: &str) -> Option<&AlgorithmSpec> {
        self.algorithms.iter().find(|a| a.name == name)
    }

    /// Every hyperpartition in declaration order, enabled or not.
    pub fn hyperpartitions(&self) -> Vec<Hyperpartition> {
        self.algorithms.iter().flat_map(enumerate_hyperpartitions).collect()
    }

    pub fn hyperpartition(&self, id: &str) -> Option<Hyperpartition> {
        let algorithm = id.split(':').next()?;
        enumerate_hyperpartitions(self.algorithm(algorithm)?)
            .into_iter()
            .find(|hp| hp.id == id)
    }

    pub fn is_algorithm_enabled(&self, name: &str) -> bool {
        self.algorithm_enabled.get(name).copied().unwrap_or(false)
    }

    /// A hyperpartition is effectively enabled only if its algorithm is too.
    pub fn is_enabled(&self, hp: &Hyperpartition) -> bool {
        self.is_algorithm_enabled(&hp.algorithm)
            && self.hyperpartition_enabled.get(&hp.id).copied().unwrap_or(false)
    }

    pub fn enabled_hyperpartitions(&self) -> Vec<Hyperpartition> {
        self.hyperpartitions()
            .into_iter()
            .filter(|hp| self.is_enabled(hp))
            .collect()
    }

    pub fn enabled_algorithms(&self) -> Vec<&AlgorithmSpec> {
        self.algorithms
            .iter()
            .filter(|a| self.is_algorithm_enabled(&a.name))
            .collect()
    }

    /// Active range of a tunable within a hyperpartition.
    pub fn active_interval(&self, hp_id: &str, spec: &HyperparameterSpec) -> Interval {
        self.active_range
            .get(hp_id)
            .and_then(|m| m.get(&spec.name))
            .copied()
            .unwrap_or_else(|| spec.declared())
    }

    /// Reports every invariant violation with a machine-readable code.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for alg in &self.algorithms {
            for problem in alg.problems() {
                report.push(ErrorCode::InvalidSpec, problem);
            }
        }
        let hps: BTreeMap<String, Hyperpartition> = self
            .hyperpartitions()
            .into_iter()
            .map(|hp| (hp.id.clone(), hp))
            .collect();
        for name in self.algorithm_enabled.keys() {
            if self.algorithm(name).is_none() {
                report.push(ErrorCode::UnknownTarget, format!("unknown algorithm {name}"));
            }
        }
        for id in self.hyperpartition_enabled.keys() {
            if !hps.contains_key(id) {
                report.push(ErrorCode::UnknownTarget, format!("unknown hyperpartition {id}"));
            }
        }
        for (id, ranges) in &self.active_range {
            let Some(hp) = hps.get(id) else {
                report.push(ErrorCode::UnknownTarget, format!("unknown hyperpartition {id}"));
                continue;
            };
            for (name, range) in ranges {
                let Some(spec) = hp.tunable(name) else {
                    report.push(
                        ErrorCode::UnknownTarget,
                        format!("{id} has no tunable {name}"),
                    );
                    continue;
                };
                if range.lo().is_nan() || range.hi().is_nan() || range.lo() >= range.hi() {
                    report.push(
                        ErrorCode::EmptyRange,
                        format!("{id}/{name}: [{}, {}] is empty", range.lo(), range.hi()),
                    );
                } else if range.lo() < spec.lower || range.hi() > spec.upper {
                    report.push(
                        ErrorCode::RangeOutOfBounds,
                        format!(
                            "{id}/{name}: [{}, {}] exceeds declared [{}, {}]",
                            range.lo(),
                            range.hi(),
                            spec.lower,
                            spec.upper
                        ),
                    );
                }
            }
        }
        if !hps.values().any(|hp| self.is_enabled(hp)) {
            report.push(
                ErrorCode::NoEnabledHyperpartition,
                "no hyperpartition is enabled",
            );
        }
        report
    }

    /// Returns a new space with the delta applied; `self` is untouched.
    pub fn apply_delta(&self, delta: &SpaceDelta) -> Result<SearchSpace> {
        let mut next = self.clone();
        let flag_only = delta.hyperparameter.is_none() && delta.range.is_none();
        match delta.kind {
            DeltaKind::EnableAlgorithm | DeltaKind::DisableAlgorithm => {
                if !flag_only {
                    return Err(invalid_delta("enable/disable deltas carry no range"));
                }
                if self.algorithm(&delta.target).is_none() {
                    return Err(unknown_target(&delta.target));
                }
                let on = delta.kind == DeltaKind::EnableAlgorithm;
                next.algorithm_enabled.insert(delta.target.clone(), on);
            }
            DeltaKind::EnableHyperpartition | DeltaKind::DisableHyperpartition => {
                if !flag_only {
                    return Err(invalid_delta("enable/disable deltas carry no range"));
                }
                if self.hyperpartition(&delta.target).is_none() {
                    return Err(unknown_target(&delta.target));
                }
                let on = delta.kind == DeltaKind::EnableHyperpartition;
                next.hyperpartition_enabled.insert(delta.target.clone(), on);
            }
            DeltaKind::SetRange => {
                let (Some(name), Some(range)) = (&delta.hyperparameter, delta.range) else {
                    return Err(invalid_delta("set_range needs a hyperparameter and a range"));
                };
                if !(range.lo().is_finite() && range.hi().is_finite()) {
                    return Err(invalid_delta("range bounds must be finite"));
                }
                if range.lo() >= range.hi() {
                    return Err(empty_range(name, range));
                }
                for hp in self.range_targets(&delta.target, name)? {
                    let spec = hp.tunable(name).expect("filtered by range_targets");
                    let clipped = spec
                        .clip(range.lo(), range.hi())
                        .ok_or_else(|| empty_range(name, range))?;
                    let entry = next.active_range.entry(hp.id.clone()).or_default();
                    if clipped == spec.declared() {
                        entry.remove(name);
                    } else {
                        entry.insert(name.clone(), clipped);
                    }
                }
            }
            DeltaKind::ResetRange => {
                let Some(name) = &delta.hyperparameter else {
                    return Err(invalid_delta("reset_range needs a hyperparameter"));
                };
                if delta.range.is_some() {
                    return Err(invalid_delta("reset_range carries no range"));
                }
                for hp in self.range_targets(&delta.target, name)? {
                    if let Some(entry) = next.active_range.get_mut(&hp.id) {
                        entry.remove(name);
                    }
                }
            }
        }
        next.active_range.retain(|_, ranges| !ranges.is_empty());
        Ok(next)
    }

    /// Applies all deltas or none.
    pub fn apply_deltas(&self, deltas: &[SpaceDelta]) -> Result<SearchSpace> {
        deltas
            .iter()
            .try_fold(self.clone(), |space, delta| space.apply_delta(delta))
    }

    fn range_targets(&self, target: &str, name: &str) -> Result<Vec<Hyperpartition>> {
        let candidates = match self.algorithm(target) {
            Some(alg) => enumerate_hyperpartitions(alg),
            None => vec![self.hyperpartition(target).ok_or_else(|| unknown_target(target))?],
        };
        let hits: Vec<_> = candidates
            .into_iter()
            .filter(|hp| hp.tunable(name).is_some())
            .collect();
        if hits.is_empty() {
            return Err(unknown_target(&format!("{target}/{name}")));
        }
        Ok(hits)
    }
}

fn unknown_target(target: &str) -> Rejection {
    Rejection::new(ErrorCode::UnknownTarget, format!("unknown target {target}"))
}

fn invalid_delta(message: &str) -> Rejection {
    Rejection::new(ErrorCode::InvalidDelta, message)
}

fn empty_range(name: &str, range: Interval) -> Rejection {
    Rejection::new(
        ErrorCode::EmptyRange,
        format!("{name}: [{}, {}] leaves an empty range", range.lo(), range.hi()),
    )
}

/// Draws one value uniformly from `range` (log10-uniform for log specs),
/// rounding and clamping integer parameters.
pub fn sample_value<R: Rng + ?Sized>(spec: &HyperparameterSpec, range: Interval, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let raw = match spec.scale {
        Scale::Linear => range.lo() + u * (range.hi() - range.lo()),
        Scale::Log => {
            let (a, b) = (range.lo().log10(), range.hi().log10());
            10f64.powf(a + u * (b - a))
        }
    };
    let value = match spec.kind {
        ParamKind::Integer => raw.round(),
        ParamKind::Real => raw,
    };
    value.clamp(range.lo(), range.hi())
}

pub fn sample_uniform_with<R: Rng + ?Sized>(
    hp: &Hyperpartition,
    space: &SearchSpace,
    rng: &mut R,
) -> Configuration {
    hp.tunables
        .iter()
        .map(|spec| {
            let range = space.active_interval(&hp.id, spec);
            (spec.name.clone(), sample_value(spec, range, rng))
        })
        .collect()
}

/// Independent uniform draw of every tunable inside its active range.
pub fn sample_uniform(hp: &Hyperpartition, space: &SearchSpace, seed: u64) -> Configuration {
    sample_uniform_with(hp, space, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Whether every value lies inside its active range (inclusive).
pub fn contains(hp: &Hyperpartition, space: &SearchSpace, config: &Configuration) -> Result<bool> {
    let expected: BTreeSet<&str> = hp.tunables.iter().map(|t| t.name.as_str()).collect();
    let got: BTreeSet<&str> = config.keys().map(String::as_str).collect();
    if expected != got {
        return Err(Rejection::new(
            ErrorCode::ConfigMismatch,
            format!("{} expects {:?}, got {:?}", hp.id, expected, got),
        ));
    }
    Ok(hp
        .tunables
        .iter()
        .all(|spec| space.active_interval(&hp.id, spec).contains(config[&spec.name])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn knn_like() -> AlgorithmSpec {
        AlgorithmSpec::new("KNN")
            .categorical("weights", &["uniform", "distance"])
            .categorical("metric", &["euclidean", "manhattan"])
            .numeric(HyperparameterSpec::integer("n_neighbors", 1.0, 30.0))
    }

    #[test]
    fn cartesian_product_of_categoricals() {
        let hps = enumerate_hyperpartitions(&knn_like());
        let ids: Vec<_> = hps.iter().map(|h| h.id.as_str()).collect();
        assert_eq!(
            ids,
            [
                "KNN:weights=uniform,metric=euclidean",
                "KNN:weights=uniform,metric=manhattan",
                "KNN:weights=distance,metric=euclidean",
                "KNN:weights=distance,metric=manhattan",
            ]
        );
    }

    #[test]
    fn no_categoricals_yields_single_partition() {
        let alg = AlgorithmSpec::new("NB").numeric(HyperparameterSpec::log_real("s", 1e-9, 1e-3));
        let hps = enumerate_hyperpartitions(&alg);
        assert_eq!(hps.len(), 1);
        assert!(hps[0].assignment.is_empty());
        assert_eq!(hps[0].id, "NB");
    }

    #[test]
    fn applies_when_filters_tunables() {
        let alg = AlgorithmSpec::new("SVM")
            .categorical("kernel", &["a", "b", "c"])
            .numeric(HyperparameterSpec::real("c_reg", 0.1, 10.0))
            .numeric(HyperparameterSpec::integer("degree", 2.0, 5.0).when("kernel", "c"));
        let hps = enumerate_hyperpartitions(&alg);
        assert_eq!(hps.len(), 3);
        // oracle: check the predicate independently over every assignment
        for hp in &hps {
            let has_degree = hp.tunable("degree").is_some();
            assert_eq!(has_degree, hp.assignment["kernel"] == "c", "{}", hp.id);
            assert!(hp.tunable("c_reg").is_some());
        }
    }

    #[test]
    fn builtin_space_shape() {
        let space = SearchSpace::builtin();
        assert_eq!(space.algorithms.len(), 6);
        assert_eq!(space.hyperpartitions().len(), 14);
        assert!(space.validate().is_ok());
    }

    #[test]
    fn inverted_range_reported_as_empty() {
        let mut space = SearchSpace::builtin();
        space
            .active_range
            .entry("ExtraTrees:criterion=gini".into())
            .or_default()
            .insert("max_features".into(), Interval(0.9, 0.2));
        let report = space.validate();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].code, ErrorCode::EmptyRange);
    }

    #[test]
    fn all_algorithms_disabled_reported() {
        let mut space = SearchSpace::builtin();
        for alg in space.algorithm_enabled.values_mut() {
            *alg = false;
        }
        let codes: Vec<_> = space.validate().violations.iter().map(|v| v.code).collect();
        assert_eq!(codes, [ErrorCode::NoEnabledHyperpartition]);
    }

    #[test]
    fn set_range_restricts_and_clips() {
        let space = SearchSpace::builtin();
        let hp = "ExtraTrees:criterion=gini";
        let next = space
            .apply_delta(&SpaceDelta::set_range(hp, "max_features", 0.7, 1.0))
            .unwrap();
        let spec = next.hyperpartition(hp).unwrap().tunable("max_features").cloned().unwrap();
        assert_eq!(next.active_interval(hp, &spec), Interval(0.7, 1.0));
        // input space unchanged
        assert_eq!(space.active_interval(hp, &spec), Interval(0.1, 1.0));

        let clipped = space
            .apply_delta(&SpaceDelta::set_range(hp, "max_features", 0.05, 0.7))
            .unwrap();
        assert_eq!(clipped.active_interval(hp, &spec), Interval(0.1, 0.7));
    }

    #[test]
    fn set_range_on_algorithm_covers_all_its_partitions() {
        let space = SearchSpace::builtin()
            .apply_delta(&SpaceDelta::set_range("ExtraTrees", "max_features", 0.7, 1.0))
            .unwrap();
        for hp in space.hyperpartitions() {
            let Some(spec) = hp.tunable("max_features") else { continue };
            let want = if hp.algorithm == "ExtraTrees" { Interval(0.7, 1.0) } else { spec.declared() };
            assert_eq!(space.active_interval(&hp.id, spec), want, "{}", hp.id);
        }
    }

    #[test]
    fn range_outside_bounds_is_empty() {
        let err = SearchSpace::builtin()
            .apply_delta(&SpaceDelta::set_range("ExtraTrees", "max_features", 1.5, 2.0))
            .unwrap_err();
        assert_eq!(err.code, ErrorCode::EmptyRange);
    }

    #[test]
    fn integer_range_snaps_inward() {
        let space = SearchSpace::builtin()
            .apply_delta(&SpaceDelta::set_range("KNN", "n_neighbors", 2.5, 7.5))
            .unwrap();
        let hp = &space.hyperpartitions()[0];
        assert_eq!(space.active_interval(&hp.id, &hp.tunables[0]), Interval(3.0, 7.0));
        let err = space
            .apply_delta(&SpaceDelta::set_range("KNN", "n_neighbors", 2.2, 2.8))
            .unwrap_err();
        assert_eq!(err.code, ErrorCode::EmptyRange);
    }

    #[test]
    fn unknown_targets_rejected() {
        let space = SearchSpace::builtin();
        for delta in [
            SpaceDelta::disable_algorithm("SVM"),
            SpaceDelta::disable_hyperpartition("KNN:weights=cosine,metric=euclidean"),
            SpaceDelta::set_range("KNN", "max_features", 0.2, 0.3),
            SpaceDelta::reset_range("Nope", "x"),
        ] {
            assert_eq!(space.apply_delta(&delta).unwrap_err().code, ErrorCode::UnknownTarget);
        }
    }

    #[test]
    fn malformed_delta_shape_rejected() {
        let mut delta = SpaceDelta::disable_algorithm("KNN");
        delta.range = Some(Interval(0.0, 1.0));
        let err = SearchSpace::builtin().apply_delta(&delta).unwrap_err();
        assert_eq!(err.code, ErrorCode::InvalidDelta);
    }

    #[test]
    fn reset_range_restores_canonical_form() {
        let space = SearchSpace::builtin();
        let narrowed = space
            .apply_delta(&SpaceDelta::set_range("RandomForest", "max_depth", 3.0, 9.0))
            .unwrap();
        let reset = narrowed
            .apply_delta(&SpaceDelta::reset_range("RandomForest", "max_depth"))
            .unwrap();
        assert_eq!(reset, space);
    }

    #[test]
    fn disable_then_enable_is_identity() {
        let space = SearchSpace::builtin();
        let round = space
            .apply_delta(&SpaceDelta::disable_algorithm("KNN"))
            .and_then(|s| s.apply_delta(&SpaceDelta::enable_algorithm("KNN")))
            .unwrap();
        assert_eq!(round, space);
    }

    #[test]
    fn disabled_algorithm_masks_partitions() {
        let space = SearchSpace::builtin()
            .apply_delta(&SpaceDelta::disable_algorithm("KNN"))
            .unwrap();
        assert_eq!(space.enabled_hyperpartitions().len(), 10);
        assert!(space.hyperpartition_enabled.values().all(|on| *on));
    }

    #[test]
    fn contains_boundaries_and_restriction() {
        let space = SearchSpace::builtin();
        let hp = space.hyperpartition("ExtraTrees:criterion=entropy").unwrap();
        let mut config: Configuration = [
            ("n_trees".to_string(), 5.0),
            ("max_features".to_string(), 0.1),
            ("max_depth".to_string(), 1.0),
        ]
        .into();
        assert!(contains(&hp, &space, &config).unwrap());
        config.insert("max_features".into(), 0.5);
        assert!(contains(&hp, &space, &config).unwrap());
        let restricted = space
            .apply_delta(&SpaceDelta::set_range("ExtraTrees", "max_features", 0.7, 1.0))
            .unwrap();
        assert!(!contains(&hp, &restricted, &config).unwrap());

        config.remove("max_depth");
        assert_eq!(
            contains(&hp, &space, &config).unwrap_err().code,
            ErrorCode::ConfigMismatch
        );
    }

    #[test]
    fn empty_tunables_sample_to_empty_config() {
        let alg = AlgorithmSpec::new("Const");
        let space = SearchSpace::new(vec![alg]).unwrap();
        let hp = &space.hyperpartitions()[0];
        assert!(sample_uniform(hp, &space, 3).is_empty());
    }

    #[test]
    fn log_uniform_sampling_fraction() {
        // log10-uniform over four decades: each decade gets 1/3 of the mass
        let alg = AlgorithmSpec::new("Lin").numeric(HyperparameterSpec::log_real("lr", 1e-4, 1e-1));
        let space = SearchSpace::new(vec![alg]).unwrap();
        let hp = &space.hyperpartitions()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let low = (0..n)
            .filter(|_| sample_uniform_with(hp, &space, &mut rng)["lr"] <= 1e-3)
            .count();
        let frac = low as f64 / n as f64;
        assert!((frac - 1.0 / 3.0).abs() < 0.02, "fraction {frac}");
    }

    #[test]
    fn space_json_is_byte_stable() {
        let space = SearchSpace::builtin()
            .apply_delta(&SpaceDelta::set_range("ExtraTrees", "max_features", 0.7, 1.0))
            .unwrap();
        let a = serde_json::to_string(&space).unwrap();
        let back: SearchSpace = serde_json::from_str(&a).unwrap();
        assert_eq!(back, space);
        assert_eq!(serde_json::to_string(&back).unwrap(), a);
    }

    #[test]
    fn delta_wire_form() {
        let delta = SpaceDelta::set_range("ExtraTrees", "max_features", 0.7, 1.0);
        let json = serde_json::to_string(&delta).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"set_range","target":"ExtraTrees","hyperparameter":"max_features","range":[0.7,1.0]}"#
        );
        let flag: SpaceDelta =
            serde_json::from_str(r#"{"kind":"disable_algorithm","target":"KNN"}"#).unwrap();
        assert_eq!(flag, SpaceDelta::disable_algorithm("KNN"));
    }

    fn arb_delta() -> impl Strategy<Value = SpaceDelta> {
        let hps: Vec<Hyperpartition> = SearchSpace::builtin().hyperpartitions();
        let algs = ["KNN", "DecisionTree", "RandomForest", "ExtraTrees", "SGDLogistic", "GaussianNB"];
        prop_oneof![
            (0..algs.len(), any::<bool>()).prop_map(move |(i, on)| if on {
                SpaceDelta::enable_algorithm(algs[i])
            } else {
                SpaceDelta::disable_algorithm(algs[i])
            }),
            (0..hps.len(), any::<bool>(), 0.0f64..1.0, 0.0f64..1.0).prop_map(
                move |(i, flag, a, b)| {
                    let hp = &hps[i];
                    match hp.tunables.first() {
                        Some(spec) if flag => {
                            let (lo, hi) = (a.min(b), a.max(b) + 1e-3);
                            let w = spec.upper - spec.lower;
                            SpaceDelta::set_range(&hp.id, &spec.name, spec.lower + lo * w, spec.lower + hi * w)
                        }
                        _ => SpaceDelta::enable_hyperpartition(&hp.id),
                    }
                }
            ),
        ]
    }

    proptest! {
        #[test]
        fn deltas_are_idempotent(delta in arb_delta()) {
            let space = SearchSpace::builtin();
            if let Ok(once) = space.apply_delta(&delta) {
                let twice = once.apply_delta(&delta).unwrap();
                prop_assert_eq!(once, twice);
            }
        }

        #[test]
        fn samples_stay_inside_active_ranges(
            deltas in proptest::collection::vec(arb_delta(), 0..6),
            seed in any::<u64>(),
        ) {
            let mut space = SearchSpace::builtin();
            for d in &deltas {
                if let Ok(next) = space.apply_delta(d) {
                    space = next;
                }
            }
            for hp in space.hyperpartitions() {
                let config = sample_uniform(&hp, &space, seed);
                prop_assert!(contains(&hp, &space, &config).unwrap());
                for spec in &hp.tunables {
                    if spec.kind == ParamKind::Integer {
                        prop_assert_eq!(config[&spec.name].fract(), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn ids_are_injective() {
        let space = SearchSpace::builtin();
        let ids: BTreeSet<_> = space.hyperpartitions().into_iter().map(|h| h.id).collect();
        assert_eq!(ids.len(), 14);
    }
}
