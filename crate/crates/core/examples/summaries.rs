//! Runs 60 trials and prints the overview, per-algorithm table, one
//! hyperpartition's score sequence and a scatter series.

use std::sync::Arc;

use autosteer::data::gaussian_blobs;
use autosteer::orchestrator::{Budget, CommandKind, ControlCommand, RunEngine, RunSpec, TrialLog};
use autosteer::space::SearchSpace;
use autosteer::summary::{algorithm_summaries, focus_filter, hyperpartition_summaries, overview, scatter};

fn main() -> autosteer::error::Result<()> {
    let ds = Arc::new(gaussian_blobs(120, 4, 1.2, 9));
    let spec = RunSpec::new(SearchSpace::builtin(), Budget::trials(60), 3).metric("f1_cv3");
    let mut engine = RunEngine::create("run-0001", ds, spec, TrialLog::in_memory())?;
    engine.handle_command(ControlCommand::new(CommandKind::Start))?;
    engine.run_until_stopped()?;
    let (trials, space) = (engine.trials(), &engine.run().space);

    let o = overview(trials, space, 5);
    println!("best {:?}  coverage alg {:.0}% hp {:.0}%", o.best_score, o.algorithm_coverage * 100.0, o.hyperpartition_coverage * 100.0);
    println!("histogram {:?}", o.histogram);
    for a in algorithm_summaries(trials, space) {
        println!("  {:<14} trials {:>3}  best {:?}", a.name, a.n_trials, a.best_score);
    }
    for hp in hyperpartition_summaries(trials, space, Some("GaussianNB"))? {
        let seq: Vec<String> = hp.sequence.iter().map(|p| format!("{}:{:.3}", p.trial_id, p.score)).collect();
        println!("{} sequence {}", hp.id, seq.join(" "));
    }
    let s = scatter(trials, space, "SGDLogistic", "alpha")?;
    println!("SGDLogistic alpha ({:?} scale): {} points", s.scale, s.points.len());
    let focus = focus_filter(trials, 5);
    println!("focus algorithms {:?}", focus.algorithms);
    Ok(())
}
