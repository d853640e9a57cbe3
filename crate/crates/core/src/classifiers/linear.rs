//! Multinomial logistic regression trained by mini-batch SGD.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::argmax_lowest;

const BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L1,
    L2,
    None,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SgdParams {
    pub penalty: Penalty,
    pub learning_rate: f64,
    pub alpha: f64,
    pub epochs: usize,
}

/// One weight row per class; the last column is the bias.
#[derive(Debug, Clone)]
pub(crate) struct SoftmaxSgd {
    weights: Vec<Vec<f64>>,
}

fn softmax(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    for l in logits.iter_mut() {
        *l /= sum;
    }
}

impl SoftmaxSgd {
    fn logits(&self, row: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| {
                let d = row.len();
                w[..d].iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + w[d]
            })
            .collect()
    }

    pub(crate) fn fit(
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        p: SgdParams,
        seed: u64,
    ) -> Result<Self, String> {
        let d = rows[0].len();
        let mut model = SoftmaxSgd {
            weights: vec![vec![0.0; d + 1]; n_classes],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..rows.len()).collect();
        for _ in 0..p.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(BATCH) {
                let mut grad = vec![vec![0.0; d + 1]; n_classes];
                for &i in batch {
                    let mut probs = model.logits(&rows[i]);
                    softmax(&mut probs);
                    for (c, g) in grad.iter_mut().enumerate() {
                        let err = probs[c] - f64::from(u8::from(labels[i] == c));
                        for (gj, xj) in g.iter_mut().zip(&rows[i]) {
                            *gj += err * xj;
                        }
                        g[d] += err;
                    }
                }
                let scale = 1.0 / batch.len() as f64;
                for (w, g) in model.weights.iter_mut().zip(&grad) {
                    for j in 0..=d {
                        let reg = if j == d {
                            0.0
                        } else {
                            match p.penalty {
                                Penalty::L1 => p.alpha * w[j].signum(),
                                Penalty::L2 => p.alpha * w[j],
                                Penalty::None => 0.0,
                            }
                        };
                        w[j] -= p.learning_rate * (g[j] * scale + reg);
                    }
                }
            }
            if model.weights.iter().flatten().any(|w| !w.is_finite()) {
                return Err("SGD diverged: non-finite weights".into());
            }
        }
        Ok(model)
    }

    pub(crate) fn predict(&self, row: &[f64]) -> usize {
        argmax_lowest(&self.logits(row))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gaussian_blobs;

    #[test]
    fn learns_linearly_separable_blobs() {
        let ds = gaussian_blobs(120, 2, 4.0, 8);
        let p = SgdParams {
            penalty: Penalty::L2,
            learning_rate: 0.1,
            alpha: 1e-4,
            epochs: 30,
        };
        let model = SoftmaxSgd::fit(&ds.features, &ds.labels, 2, p, 1).unwrap();
        let correct = ds
            .features
            .iter()
            .zip(&ds.labels)
            .filter(|(r, &l)| model.predict(r) == l)
            .count();
        assert!(correct >= 118, "{correct}/120");
    }

    #[test]
    fn divergence_is_an_error() {
        let rows = vec![vec![1e200], vec![-1e200]];
        let p = SgdParams {
            penalty: Penalty::None,
            learning_rate: 1e10,
            alpha: 0.0,
            epochs: 3,
        };
        assert!(SoftmaxSgd::fit(&rows, &[0, 1], 2, p, 0).is_err());
    }
}
