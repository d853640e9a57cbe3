//! Tunes one real parameter on `f(x) = 1 - (x - 0.3)^2` and compares the
//! GP tuner with uniform sampling over the same number of evaluations.

use autosteer::seed::mix_seed;
use autosteer::space::{sample_uniform, AlgorithmSpec, HyperparameterSpec, SearchSpace};
use autosteer::tuner::{TunerSettings, TunerState};

fn objective(x: f64) -> f64 {
    1.0 - (x - 0.3).powi(2)
}

fn main() -> autosteer::error::Result<()> {
    let space = SearchSpace::new(vec![AlgorithmSpec::new("Quad").numeric(HyperparameterSpec::real("x", 0.0, 1.0))])?;
    let hp = space.hyperpartitions().remove(0);
    let settings = TunerSettings::default();
    let budget = 30;

    let mut tuner = TunerState::new(&hp.id);
    let mut gp_best = f64::NEG_INFINITY;
    for t in 0..budget {
        let config = tuner.propose(&hp, &space, &settings, mix_seed(11, t));
        let score = objective(config["x"]);
        tuner.observe(&hp, &config, score);
        gp_best = gp_best.max(score);
        if t % 5 == 4 {
            println!("after {:>2} trials: best {gp_best:.6} (x={:.4})", t + 1, config["x"]);
        }
    }

    let uniform_best = (0..budget)
        .map(|t| objective(sample_uniform(&hp, &space, mix_seed(12, t))["x"]))
        .fold(f64::NEG_INFINITY, f64::max);
    println!("gp best {gp_best:.6}  uniform best {uniform_best:.6}");
    Ok(())
}
