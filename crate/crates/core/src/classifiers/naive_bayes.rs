//! Gaussian naive Bayes with variance smoothing.

use std::f64::consts::PI;

use super::argmax_lowest;

#[derive(Debug, Clone)]
pub(crate) struct GaussianNb {
    log_prior: Vec<f64>,
    mean: Vec<Vec<f64>>,
    var: Vec<Vec<f64>>,
}

impl GaussianNb {
    /// `var_smoothing` is scaled by the largest per-feature variance.
    pub(crate) fn fit(
        rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        var_smoothing: f64,
    ) -> Result<Self, String> {
        let d = rows[0].len();
        let n = rows.len() as f64;
        let mut counts = vec![0usize; n_classes];
        let mut mean = vec![vec![0.0; d]; n_classes];
        for (r, &l) in rows.iter().zip(labels) {
            counts[l] += 1;
            for (m, v) in mean[l].iter_mut().zip(r) {
                *m += v;
            }
        }
        for (m, &c) in mean.iter_mut().zip(&counts) {
            if c > 0 {
                m.iter_mut().for_each(|v| *v /= c as f64);
            }
        }
        let mut var = vec![vec![0.0; d]; n_classes];
        for (r, &l) in rows.iter().zip(labels) {
            for ((s, v), m) in var[l].iter_mut().zip(r).zip(&mean[l]) {
                *s += (v - m) * (v - m);
            }
        }
        let overall_max = (0..d)
            .map(|j| {
                let mu = rows.iter().map(|r| r[j]).sum::<f64>() / n;
                rows.iter().map(|r| (r[j] - mu).powi(2)).sum::<f64>() / n
            })
            .fold(0.0, f64::max);
        let epsilon = var_smoothing * overall_max;
        for (v, &c) in var.iter_mut().zip(&counts) {
            for s in v.iter_mut() {
                *s = if c > 0 { *s / c as f64 } else { 0.0 } + epsilon;
            }
        }
        let degenerate = counts
            .iter()
            .zip(&var)
            .any(|(&c, v)| c > 0 && v.iter().any(|&s| s.is_nan() || s <= 0.0));
        if degenerate {
            return Err("degenerate variance: a class has a zero-variance feature".into());
        }
        let log_prior = counts
            .iter()
            .map(|&c| if c > 0 { (c as f64 / n).ln() } else { f64::NEG_INFINITY })
            .collect();
        Ok(GaussianNb {
            log_prior,
            mean,
            var,
        })
    }

    pub(crate) fn predict(&self, row: &[f64]) -> usize {
        let scores: Vec<f64> = (0..self.log_prior.len())
            .map(|c| {
                if self.log_prior[c] == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                self.log_prior[c]
                    + row
                        .iter()
                        .zip(&self.mean[c])
                        .zip(&self.var[c])
                        .map(|((x, m), v)| -0.5 * (2.0 * PI * v).ln() - (x - m).powi(2) / (2.0 * v))
                        .sum::<f64>()
            })
            .collect();
        argmax_lowest(&scores)
    }
}
