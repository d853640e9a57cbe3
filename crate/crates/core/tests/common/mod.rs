#![allow(dead_code)]

use std::sync::Arc;

use autosteer::data::{gaussian_blobs, Dataset};
use autosteer::orchestrator::{Budget, CommandKind, ControlCommand, RunEngine, RunSpec, TrialLog};
use autosteer::space::{SearchSpace, SpaceDelta};
use autosteer::tuner::GpHyper;
use nalgebra::{DMatrix, DVector};

/// GP posterior by a dense LU solve, independent of the library's Cholesky path.
pub fn gp_dense_oracle(inputs: &[Vec<f64>], targets: &[f64], hyper: GpHyper, x: &[f64]) -> (f64, f64) {
    let n = inputs.len();
    let mean_y = targets.iter().sum::<f64>() / n as f64;
    let k = DMatrix::from_fn(n, n, |i, j| {
        hyper.kernel(&inputs[i], &inputs[j]) + if i == j { hyper.noise_variance } else { 0.0 }
    });
    let y = DVector::from_iterator(n, targets.iter().map(|t| t - mean_y));
    let ks = DVector::from_iterator(n, inputs.iter().map(|xi| hyper.kernel(xi, x)));
    let lu = k.lu();
    let alpha = lu.solve(&y).expect("invertible");
    let v = lu.solve(&ks).expect("invertible");
    (mean_y + ks.dot(&alpha), hyper.signal_variance - ks.dot(&v))
}

/// Two-point GP posterior from the explicit 2x2 inverse.
pub fn gp_two_point_closed_form(x: [f64; 2], y: [f64; 2], hyper: GpHyper, at: f64) -> (f64, f64) {
    let k = |a: f64, b: f64| hyper.signal_variance * (-(a - b).powi(2) / (2.0 * hyper.length_scale.powi(2))).exp();
    let a = hyper.signal_variance + hyper.noise_variance;
    let b = k(x[0], x[1]);
    let det = a * a - b * b;
    let ybar = (y[0] + y[1]) / 2.0;
    let (r0, r1) = (y[0] - ybar, y[1] - ybar);
    let (k0, k1) = (k(x[0], at), k(x[1], at));
    let alpha0 = (a * r0 - b * r1) / det;
    let alpha1 = (-b * r0 + a * r1) / det;
    let quad = (a * k0 * k0 - 2.0 * b * k0 * k1 + a * k1 * k1) / det;
    (ybar + k0 * alpha0 + k1 * alpha1, hyper.signal_variance - quad)
}

pub fn small_dataset() -> Arc<Dataset> {
    Arc::new(gaussian_blobs(60, 3, 1.5, 5))
}

/// The built-in space with forests capped small enough for fast tests.
pub fn quick_space() -> SearchSpace {
    let mut deltas = Vec::new();
    for forest in ["RandomForest", "ExtraTrees"] {
        deltas.push(SpaceDelta::set_range(forest, "n_trees", 5.0, 10.0));
        deltas.push(SpaceDelta::set_range(forest, "max_depth", 1.0, 6.0));
    }
    deltas.push(SpaceDelta::set_range("SGDLogistic", "epochs", 5.0, 20.0));
    SearchSpace::builtin().apply_deltas(&deltas).unwrap()
}

pub fn quick_spec(max_trials: u64, seed: u64) -> RunSpec {
    RunSpec::new(quick_space(), Budget::trials(max_trials), seed).metric("f1_cv3")
}

pub fn started_engine(max_trials: u64, seed: u64, log: TrialLog) -> RunEngine {
    let mut e = RunEngine::create("run-0001", small_dataset(), quick_spec(max_trials, seed), log).unwrap();
    e.handle_command(ControlCommand::new(CommandKind::Start)).unwrap();
    e
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}
