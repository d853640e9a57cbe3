//! The steering loop: run 20 trials, pause, focus on ExtraTrees with a
//! narrower `max_features`, add 5 trials to the budget and finish.

use std::sync::Arc;

use autosteer::data::gaussian_blobs;
use autosteer::orchestrator::{Budget, BudgetIncrement, CommandKind, ControlCommand, RunEngine, RunSpec, TrialLog};
use autosteer::space::{SearchSpace, SpaceDelta};
use autosteer::summary::overview;

fn main() -> autosteer::error::Result<()> {
    let ds = Arc::new(gaussian_blobs(150, 4, 1.5, 21));
    let spec = RunSpec::new(SearchSpace::builtin(), Budget::trials(35), 42).metric("f1_cv5");
    let mut engine = RunEngine::create("run-0001", ds, spec, TrialLog::in_memory())?;
    engine.handle_command(ControlCommand::new(CommandKind::Start))?;
    for _ in 0..20 {
        engine.step()?;
    }
    engine.handle_command(ControlCommand::new(CommandKind::Pause))?;
    let first = overview(engine.trials(), &engine.run().space, 3);
    println!("after 20: best {:?}, top {:?}", first.best_score, first.top_models.iter().map(|m| &m.hyperpartition_id).collect::<Vec<_>>());

    let others = ["KNN", "DecisionTree", "RandomForest", "SGDLogistic", "GaussianNB"];
    let mut deltas: Vec<SpaceDelta> = others.iter().map(|a| SpaceDelta::disable_algorithm(a)).collect();
    deltas.push(SpaceDelta::set_range("ExtraTrees", "max_features", 0.7, 1.0));
    engine.handle_command(
        ControlCommand::reconfigure(deltas)
            .with_budget(BudgetIncrement { max_trials: Some(5), max_wall_clock_secs: None }),
    )?;
    engine.handle_command(ControlCommand::new(CommandKind::Resume))?;
    engine.run_until_stopped()?;

    for t in &engine.trials()[20..] {
        println!("#{:<3} {:<40} max_features={:.3} f1={:.4}", t.trial_id, t.hyperpartition_id, t.config["max_features"], t.score.unwrap_or(0.0));
    }
    println!("status {}, {} log records", engine.run().status.as_str(), engine.log().entries().len());
    Ok(())
}
