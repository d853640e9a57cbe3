//! Scores every built-in classifier with stratified 5-fold cross-validation
//! on a synthetic two-class problem.

use autosteer::classifiers::{cross_val_f1, stratified_folds, ModelSpec};
use autosteer::data::gaussian_blobs;
use autosteer::space::{sample_uniform, SearchSpace};

fn main() -> autosteer::error::Result<()> {
    let ds = gaussian_blobs(200, 5, 2.0, 7);
    let plan = stratified_folds(&ds, 5, 1)?;
    let space = SearchSpace::builtin();
    println!("{:<52} {:>6} {:>8}", "hyperpartition", "f1", "secs");
    for (i, hp) in space.hyperpartitions().iter().enumerate() {
        let config = sample_uniform(hp, &space, i as u64);
        let model = ModelSpec::build(&hp.algorithm, &hp.assignment, &config)?;
        let result = cross_val_f1(&ds, &model, &plan, 3);
        println!("{:<52} {:>6.3} {:>8.3}", hp.id, result.mean_score, result.elapsed.as_secs_f64());
    }
    Ok(())
}
