//! Prints the built-in search space, then narrows it with a few deltas.
//!
//! ```text
//! cargo run --example search_space
//! ```

use autosteer::space::{contains, sample_uniform, SearchSpace, SpaceDelta};

fn main() -> autosteer::error::Result<()> {
    let space = SearchSpace::builtin();
    println!("{} hyperpartitions", space.hyperpartitions().len());
    for hp in space.hyperpartitions() {
        let names: Vec<&str> = hp.tunables.iter().map(|t| t.name.as_str()).collect();
        println!("  {:<48} {}", hp.id, names.join(", "));
    }

    let narrowed = space.apply_deltas(&[
        SpaceDelta::disable_algorithm("SGDLogistic"),
        SpaceDelta::set_range("KNN", "n_neighbors", 3.0, 9.0),
        SpaceDelta::disable_hyperpartition("KNN:weights=uniform,metric=manhattan"),
    ])?;
    println!("\nafter deltas: {} enabled", narrowed.enabled_hyperpartitions().len());

    let hp = narrowed.hyperpartition("KNN:weights=distance,metric=euclidean").expect("known id");
    for seed in 0..3 {
        let config = sample_uniform(&hp, &narrowed, seed);
        println!("  sample {seed}: {config:?} inside={}", contains(&hp, &narrowed, &config)?);
    }

    // an empty intersection is rejected and the original is untouched
    let err = narrowed.apply_delta(&SpaceDelta::set_range("KNN", "n_neighbors", 50.0, 60.0)).unwrap_err();
    println!("\nrejected: {}: {}", err.code.as_str(), err.message);
    Ok(())
}
