//! Per-hyperpartition proposer: uniform cold start, then GP regression with
//! expected-improvement acquisition over the active ranges.

mod gp;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::space::{
    contains, sample_uniform, sample_uniform_with, Configuration, Hyperpartition,
    HyperparameterSpec, Interval, Scale, SearchSpace,
};

pub use gp::{gp_fit, gp_fit_with, GpHyper, GpModel, NotPositiveDefinite};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunerSettings {
    /// Observations inside the active ranges needed before the GP takes over.
    pub r_min: usize,
    pub n_candidates: usize,
    pub xi: f64,
}

impl Default for TunerSettings {
    fn default() -> Self {
        Self {
            r_min: 3,
            n_candidates: 1000,
            xi: 0.01,
        }
    }
}

/// Maps each value into `[0, 1]` against its range; log specs map in log10.
pub fn normalize(config: &Configuration, tunables: &[HyperparameterSpec], ranges: &[Interval]) -> Vec<f64> {
    tunables
        .iter()
        .zip(ranges)
        .map(|(spec, r)| {
            let v = config[&spec.name];
            match spec.scale {
                Scale::Linear => (v - r.lo()) / (r.hi() - r.lo()),
                Scale::Log => (v.log10() - r.lo().log10()) / (r.hi().log10() - r.lo().log10()),
            }
        })
        .collect()
}

/// Inverse of [`normalize`], rounding integer parameters.
pub fn denormalize(point: &[f64], tunables: &[HyperparameterSpec], ranges: &[Interval]) -> Configuration {
    tunables
        .iter()
        .zip(ranges)
        .zip(point)
        .map(|((spec, r), &u)| {
            let v = match spec.scale {
                Scale::Linear => r.lo() + u * (r.hi() - r.lo()),
                Scale::Log => 10f64.powf(r.lo().log10() + u * (r.hi().log10() - r.lo().log10())),
            };
            let v = match spec.kind {
                crate::space::ParamKind::Integer => v.round(),
                crate::space::ParamKind::Real => v,
            };
            (spec.name.clone(), v)
        })
        .collect()
}

fn declared_ranges(hp: &Hyperpartition) -> Vec<Interval> {
    hp.tunables.iter().map(HyperparameterSpec::declared).collect()
}

/// Expected improvement over `best` for a maximisation problem.
pub fn expected_improvement(mean: f64, variance: f64, best: f64, xi: f64) -> f64 {
    let gain = mean - best - xi;
    let sigma = variance.max(0.0).sqrt();
    if sigma == 0.0 {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    let normal = Normal::standard();
    (gain * normal.cdf(z) + sigma * normal.pdf(z)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub config: Configuration,
    /// Normalized against the declared (not active) ranges.
    pub point: Vec<f64>,
    pub score: f64,
}

/// Scored history of one hyperpartition.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TunerState {
    pub hyperpartition_id: String,
    pub observations: Vec<Observation>,
}

impl TunerState {
    pub fn new(hyperpartition_id: &str) -> Self {
        Self {
            hyperpartition_id: hyperpartition_id.to_string(),
            observations: Vec::new(),
        }
    }

    pub fn observe(&mut self, hp: &Hyperpartition, config: &Configuration, score: f64) {
        let point = normalize(config, &hp.tunables, &declared_ranges(hp));
        self.observations.push(Observation {
            config: config.clone(),
            point,
            score,
        });
    }

    fn in_range_count(&self, hp: &Hyperpartition, space: &SearchSpace) -> usize {
        self.observations
            .iter()
            .filter(|o| contains(hp, space, &o.config).unwrap_or(false))
            .count()
    }

    /// Next configuration to evaluate; always inside the active ranges.
    ///
    /// The GP conditions on every observation, including ones that a later
    /// range restriction excluded, while candidates come only from the active
    /// ranges.
    pub fn propose(
        &self,
        hp: &Hyperpartition,
        space: &SearchSpace,
        settings: &TunerSettings,
        seed: u64,
    ) -> Configuration {
        if hp.tunables.is_empty() {
            return Configuration::new();
        }
        if self.in_range_count(hp, space) < settings.r_min || self.observations.is_empty() {
            return sample_uniform(hp, space, seed);
        }
        let inputs: Vec<Vec<f64>> = self.observations.iter().map(|o| o.point.clone()).collect();
        let targets: Vec<f64> = self.observations.iter().map(|o| o.score).collect();
        let model = match gp_fit(&inputs, &targets) {
            Ok(m) => m,
            Err(NotPositiveDefinite) => {
                tracing::warn!(hp = %hp.id, "GP factorization failed; sampling uniformly");
                return sample_uniform(hp, space, seed);
            }
        };
        let best = targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let declared = declared_ranges(hp);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen: Option<(f64, Configuration)> = None;
        for _ in 0..settings.n_candidates.max(1) {
            let candidate = sample_uniform_with(hp, space, &mut rng);
            let (mean, var) = model.posterior(&normalize(&candidate, &hp.tunables, &declared));
            let ei = expected_improvement(mean, var, best, settings.xi);
            if chosen.as_ref().is_none_or(|(top, _)| ei > *top) {
                chosen = Some((ei, candidate));
            }
        }
        chosen.map(|(_, c)| c).expect("at least one candidate")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{AlgorithmSpec, SpaceDelta};

    fn one_dim() -> (SearchSpace, Hyperpartition) {
        let alg = AlgorithmSpec::new("Quad").numeric(HyperparameterSpec::real("x", 0.0, 1.0));
        let space = SearchSpace::new(vec![alg]).unwrap();
        let hp = space.hyperpartitions().remove(0);
        (space, hp)
    }

    #[test]
    fn normalize_examples() {
        let lin = HyperparameterSpec::real("a", 0.0, 10.0);
        let log = HyperparameterSpec::log_real("b", 1e-4, 1e-1);
        let specs = [lin.clone(), log.clone()];
        let ranges = [lin.declared(), log.declared()];
        let config: Configuration = [("a".into(), 2.5), ("b".into(), 1e-3)].into();
        let p = normalize(&config, &specs, &ranges);
        assert_eq!(p[0], 0.25);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
        let lo: Configuration = [("a".into(), 0.0), ("b".into(), 1e-4)].into();
        assert_eq!(normalize(&lo, &specs, &ranges), [0.0, 0.0]);
        let back = denormalize(&p, &specs, &ranges);
        assert!((back["a"] - 2.5).abs() < 1e-12 && (back["b"] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn ei_closed_forms() {
        assert!((expected_improvement(0.5, 1.0, 0.5, 0.0) - 0.398_942_280_401_432_7).abs() < 1e-12);
        assert_eq!(expected_improvement(0.3, 0.0, 0.5, 0.0), 0.0);
        assert!((expected_improvement(0.7, 0.0, 0.5, 0.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn cold_start_and_empty_partitions() {
        let (space, hp) = one_dim();
        let state = TunerState::new(&hp.id);
        let settings = TunerSettings::default();
        assert_eq!(state.propose(&hp, &space, &settings, 4), sample_uniform(&hp, &space, 4));

        let bare = SearchSpace::new(vec![AlgorithmSpec::new("Bare")]).unwrap();
        let bare_hp = bare.hyperpartitions().remove(0);
        assert!(TunerState::new("Bare").propose(&bare_hp, &bare, &settings, 1).is_empty());
    }

    #[test]
    fn closed_loop_quadratic() {
        let (space, hp) = one_dim();
        let settings = TunerSettings::default();
        let mut state = TunerState::new(&hp.id);
        let mut best = f64::NEG_INFINITY;
        for i in 0..20 {
            let config = state.propose(&hp, &space, &settings, crate::seed::mix_seed(7, i));
            let score = 1.0 - (config["x"] - 0.3).powi(2);
            best = best.max(score);
            state.observe(&hp, &config, score);
        }
        assert!(best >= 0.99, "best {best}");
    }

    #[test]
    fn proposals_respect_restricted_range() {
        let (space, hp) = one_dim();
        let settings = TunerSettings { n_candidates: 200, ..Default::default() };
        let mut state = TunerState::new(&hp.id);
        for (x, s) in [(0.1, 0.2), (0.2, 0.4), (0.3, 0.9), (0.5, 0.5)] {
            state.observe(&hp, &[("x".to_string(), x)].into(), s);
        }
        let narrowed = space.apply_delta(&SpaceDelta::set_range("Quad", "x", 0.7, 1.0)).unwrap();
        // none of the history is inside [0.7, 1]: cold start again, still contained
        for seed in 0..20 {
            let c = state.propose(&hp, &narrowed, &settings, seed);
            assert!(contains(&hp, &narrowed, &c).unwrap());
        }
        for (x, s) in [(0.75, 0.3), (0.8, 0.25), (0.95, 0.1)] {
            state.observe(&hp, &[("x".to_string(), x)].into(), s);
        }
        for seed in 0..20 {
            let c = state.propose(&hp, &narrowed, &settings, seed);
            assert!(contains(&hp, &narrowed, &c).unwrap());
        }
    }
}
