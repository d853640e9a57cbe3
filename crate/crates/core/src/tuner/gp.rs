//! Exact Gaussian-process regression with a squared-exponential kernel.

/// Kernel and noise settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyper {
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl GpHyper {
    /// Fixed settings: `ℓ = 0.1·√d`, `σf² = max(var(y), 1e-4)`, `σn² = 1e-4`.
    pub fn for_data(d: usize, y: &[f64]) -> Self {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            length_scale: 0.1 * (d as f64).sqrt(),
            signal_variance: var.max(1e-4),
            noise_variance: 1e-4,
        }
    }

    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.signal_variance * (-sq / (2.0 * self.length_scale * self.length_scale)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotPositiveDefinite;

/// A fitted GP: training inputs, centred targets and the Cholesky factor of
/// `K + σn² I`.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub hyper: GpHyper,
    inputs: Vec<Vec<f64>>,
    y_mean: f64,
    chol: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

/// Lower-triangular `L` with `L Lᵀ = a`.
fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NotPositiveDefinite> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let diag = a[i][i] - dot;
                if !diag.is_finite() || diag <= 0.0 {
                    return Err(NotPositiveDefinite);
                }
                l[i][i] = diag.sqrt();
            } else {
                l[i][j] = (a[i][j] - dot) / l[j][j];
            }
        }
    }
    Ok(l)
}

fn forward(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    for i in 0..b.len() {
        let dot: f64 = (0..i).map(|k| l[i][k] * x[k]).sum();
        x[i] = (b[i] - dot) / l[i][i];
    }
    x
}

fn backward(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let dot: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (b[i] - dot) / l[i][i];
    }
    x
}

/// Fits with the fixed settings from [`GpHyper::for_data`].
pub fn gp_fit(inputs: &[Vec<f64>], targets: &[f64]) -> Result<GpModel, NotPositiveDefinite> {
    let d = inputs.first().map_or(0, Vec::len);
    gp_fit_with(inputs, targets, GpHyper::for_data(d, targets))
}

pub fn gp_fit_with(
    inputs: &[Vec<f64>],
    targets: &[f64],
    hyper: GpHyper,
) -> Result<GpModel, NotPositiveDefinite> {
    assert!(!inputs.is_empty() && inputs.len() == targets.len());
    let n = inputs.len();
    let y_mean = targets.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = targets.iter().map(|y| y - y_mean).collect();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v = hyper.kernel(&inputs[i], &inputs[j]);
            k[i][j] = v;
            k[j][i] = v;
        }
        k[i][i] += hyper.noise_variance;
    }
    let chol = cholesky(&k)?;
    let alpha = backward(&chol, &forward(&chol, &centred));
    Ok(GpModel {
        hyper,
        inputs: inputs.to_vec(),
        y_mean,
        chol,
        alpha,
    })
}

impl GpModel {
    /// Posterior mean and latent variance (clamped at zero) at `x`.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let kstar: Vec<f64> = self.inputs.iter().map(|xi| self.hyper.kernel(xi, x)).collect();
        let mean = self.y_mean + kstar.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        let v = forward(&self.chol, &kstar);
        let var = self.hyper.signal_variance - v.iter().map(|e| e * e).sum::<f64>();
        (mean, var.max(0.0))
    }
}
