//! Brute-force k-nearest neighbours.

use serde::{Deserialize, Serialize};

use super::argmax_lowest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteWeights {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    Euclidean,
    Manhattan,
}

impl DistanceMetric {
    fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        let pairs = a.iter().zip(b);
        match self {
            DistanceMetric::Euclidean => pairs.map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            DistanceMetric::Manhattan => pairs.map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

/// Distance ties resolve to the lower training row; vote ties to the lower class index.
pub(crate) fn predict(
    train: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    queries: &[Vec<f64>],
    k: usize,
    weights: VoteWeights,
    metric: DistanceMetric,
) -> Vec<usize> {
    let k = k.clamp(1, train.len());
    queries
        .iter()
        .map(|q| {
            let mut dist: Vec<(f64, usize)> = train
                .iter()
                .enumerate()
                .map(|(i, r)| (metric.distance(q, r), i))
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let nearest = &dist[..k];
            let mut votes = vec![0.0; n_classes];
            let exact = nearest.iter().any(|(d, _)| *d == 0.0);
            for &(d, i) in nearest {
                let w = match weights {
                    VoteWeights::Uniform => 1.0,
                    // exact matches outvote everything else
                    VoteWeights::Distance if exact => f64::from(u8::from(d == 0.0)),
                    VoteWeights::Distance => 1.0 / d,
                };
                votes[labels[i]] += w;
            }
            argmax_lowest(&votes)
        })
        .collect()
}
