//! CART decision trees, random forests and extremely randomized trees.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax_lowest, TrainSet};
use crate::seed::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl Criterion {
    fn impurity(self, counts: &[usize], total: usize) -> f64 {
        if total == 0 {
            return 0.0;
        }
        let n = total as f64;
        match self {
            Criterion::Gini => 1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>(),
            Criterion::Entropy => -counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / n;
                    p * p.log2()
                })
                .sum::<f64>(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub criterion: Criterion,
    pub n_trees: usize,
    /// Fraction of features considered at each split.
    pub max_features: f64,
    pub max_depth: usize,
    pub bootstrap: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features drawn per split; `None` means all of them.
    pub max_features: Option<usize>,
    pub random_thresholds: bool,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    n_classes: usize,
    params: &'a TreeParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &i in idx {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    fn leaf(&mut self, counts: &[usize]) -> usize {
        let votes: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        self.nodes.push(Node::Leaf(argmax_lowest(&votes)));
        self.nodes.len() - 1
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || idx.len() < self.params.min_samples_split {
            return self.leaf(&counts);
        }
        let Some(best) = self.best_split(&idx) else {
            return self.leaf(&counts);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.rows[i][best.feature] <= best.threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf(0));
        let left = self.build(left, depth + 1);
        let right = self.build(right, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        slot
    }

    fn features(&mut self) -> Vec<usize> {
        let d = self.rows[0].len();
        match self.params.max_features {
            Some(m) if m < d => {
                let mut picked = sample(&mut self.rng, d, m.max(1)).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for feature in self.features() {
            let found = if self.params.random_thresholds {
                self.random_split(idx, feature)
            } else {
                self.exhaustive_split(idx, feature)
            };
            if let Some(c) = found {
                if best.as_ref().is_none_or(|b| c.score < b.score) {
                    best = Some(c);
                }
            }
        }
        best
    }

    /// Weighted child impurity for every midpoint between distinct values.
    fn exhaustive_split(&self, idx: &[usize], feature: usize) -> Option<Candidate> {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| self.rows[a][feature].total_cmp(&self.rows[b][feature]));
        let total = order.len();
        let mut right = self.counts(&order);
        let mut left = vec![0; self.n_classes];
        let mut best: Option<Candidate> = None;
        for pos in 0..total - 1 {
            let label = self.labels[order[pos]];
            left[label] += 1;
            right[label] -= 1;
            let here = self.rows[order[pos]][feature];
            let next = self.rows[order[pos + 1]][feature];
            if here == next {
                continue;
            }
            let nl = pos + 1;
            let score = self.weighted(&left, nl, &right, total - nl);
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(Candidate {
                    feature,
                    threshold: here + (next - here) / 2.0,
                    score,
                });
            }
        }
        best
    }

    /// One uniformly drawn threshold between the node's min and max value.
    fn random_split(&mut self, idx: &[usize], feature: usize) -> Option<Candidate> {
        let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = self.rows[i][feature];
            (lo.min(v), hi.max(v))
        });
        if lo >= hi {
            return None;
        }
        let threshold = self.rng.random_range(lo..hi);
        let mut left = vec![0; self.n_classes];
        let mut right = vec![0; self.n_classes];
        for &i in idx {
            if self.rows[i][feature] <= threshold {
                left[self.labels[i]] += 1;
            } else {
                right[self.labels[i]] += 1;
            }
        }
        let nl: usize = left.iter().sum();
        Some(Candidate {
            feature,
            threshold,
            score: self.weighted(&left, nl, &right, idx.len() - nl),
        })
    }

    fn weighted(&self, left: &[usize], nl: usize, right: &[usize], nr: usize) -> f64 {
        let n = (nl + nr) as f64;
        let c = self.params.criterion;
        (nl as f64 / n) * c.impurity(left, nl) + (nr as f64 / n) * c.impurity(right, nr)
    }
}

impl Tree {
    pub(crate) fn fit(train: TrainSet<'_>, params: &TreeParams, seed: u64) -> Tree {
        Self::fit_rows(train, (0..train.rows.len()).collect(), params, seed)
    }

    fn fit_rows(train: TrainSet<'_>, idx: Vec<usize>, params: &TreeParams, seed: u64) -> Tree {
        let mut builder = Builder {
            rows: train.rows,
            labels: train.labels,
            n_classes: train.n_classes,
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            nodes: Vec::new(),
        };
        builder.build(idx, 0);
        Tree {
            nodes: builder.nodes,
        }
    }

    pub(crate) fn predict(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(class) => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Majority vote over independently grown trees.
#[derive(Debug, Clone)]
pub(crate) struct Forest {
    trees: Vec<Tree>,
    n_classes: usize,
}

impl Forest {
    pub(crate) fn fit(train: TrainSet<'_>, p: &ForestParams, random_thresholds: bool, seed: u64) -> Forest {
        let n = train.rows.len();
        let d = train.rows[0].len();
        let per_split = ((p.max_features * d as f64).ceil() as usize).clamp(1, d);
        let params = TreeParams {
            criterion: p.criterion,
            max_depth: p.max_depth,
            min_samples_split: 2,
            max_features: Some(per_split),
            random_thresholds,
        };
        let trees = (0..p.n_trees)
            .map(|t| {
                let tree_seed = mix_seed(seed, t as u64);
                let idx = if p.bootstrap {
                    let mut rng = ChaCha8Rng::seed_from_u64(tree_seed ^ 0x9e37_79b9);
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                Tree::fit_rows(train, idx, &params, tree_seed)
            })
            .collect();
        Forest {
            trees,
            n_classes: train.n_classes,
        }
    }

    pub(crate) fn predict_all(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.iter()
            .map(|r| {
                let mut votes = vec![0.0; self.n_classes];
                for t in &self.trees {
                    votes[t.predict(r)] += 1.0;
                }
                argmax_lowest(&votes)
            })
            .collect()
    }
}
