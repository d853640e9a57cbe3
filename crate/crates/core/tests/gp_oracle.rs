mod common;

use autosteer::tuner::{gp_fit, gp_fit_with, GpHyper};
use common::{gp_dense_oracle, gp_two_point_closed_form};
use proptest::prelude::*;

#[test]
fn two_points_match_closed_form() {
    let inputs = vec![vec![0.2], vec![0.6]];
    let targets = [0.55, 0.8];
    let model = gp_fit(&inputs, &targets).unwrap();
    let hyper = GpHyper::for_data(1, &targets);
    for at in [0.0, 0.2, 0.35, 0.6, 0.9] {
        let (m, v) = model.posterior(&[at]);
        let (om, ov) = gp_two_point_closed_form([0.2, 0.6], targets, hyper, at);
        assert!((m - om).abs() < 1e-8, "mean at {at}: {m} vs {om}");
        assert!((v - ov.max(0.0)).abs() < 1e-8, "var at {at}: {v} vs {ov}");
    }
}

#[test]
fn three_points_match_dense_solve() {
    let inputs = vec![vec![0.1, 0.9], vec![0.5, 0.5], vec![0.8, 0.2]];
    let targets = [0.61, 0.93, 0.72];
    let hyper = GpHyper { length_scale: 0.3, signal_variance: 0.02, noise_variance: 1e-4 };
    let model = gp_fit_with(&inputs, &targets, hyper).unwrap();
    for x in [[0.0, 0.0], [0.5, 0.5], [0.3, 0.7], [1.0, 1.0]] {
        let (m, v) = model.posterior(&x);
        let (om, ov) = gp_dense_oracle(&inputs, &targets, hyper, &x);
        assert!((m - om).abs() < 1e-8);
        assert!((v - ov.max(0.0)).abs() < 1e-8);
    }
}

#[test]
fn posterior_interpolates_training_points() {
    let inputs = vec![vec![0.1], vec![0.5], vec![0.9]];
    let targets = [0.2, 0.9, 0.4];
    let model = gp_fit(&inputs, &targets).unwrap();
    for (x, y) in inputs.iter().zip(targets) {
        let (m, v) = model.posterior(x);
        assert!((m - y).abs() < 0.01);
        assert!(v < 1e-3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn random_small_problems_match_dense_solve(
        pts in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 2..6),
        x in (0.0f64..1.0, 0.0f64..1.0),
    ) {
        let inputs: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0, p.1]).collect();
        let targets: Vec<f64> = pts.iter().map(|p| p.2).collect();
        let hyper = GpHyper { length_scale: 0.2, signal_variance: 0.05, noise_variance: 1e-4 };
        let model = gp_fit_with(&inputs, &targets, hyper).unwrap();
        let (m, v) = model.posterior(&[x.0, x.1]);
        let (om, ov) = gp_dense_oracle(&inputs, &targets, hyper, &[x.0, x.1]);
        prop_assert!((m - om).abs() < 1e-6, "{} vs {}", m, om);
        prop_assert!((v - ov.max(0.0)).abs() < 1e-8);
    }
}
