//! Writes a run to a JSON-lines file, tears its last line the way a crash
//! would, and rebuilds the run from what survived.

use std::sync::Arc;

use autosteer::data::gaussian_blobs;
use autosteer::orchestrator::{parse_log, Budget, CommandKind, ControlCommand, RunEngine, RunSpec, TrialLog};
use autosteer::space::SearchSpace;

fn main() -> autosteer::error::Result<()> {
    let dir = std::env::temp_dir().join(format!("autosteer-replay-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("run-0001.jsonl");
    let ds = Arc::new(gaussian_blobs(80, 3, 2.0, 5));

    let spec = RunSpec::new(SearchSpace::builtin(), Budget::trials(15), 7).metric("f1_cv3");
    let mut engine = RunEngine::create("run-0001", ds.clone(), spec, TrialLog::open_file(&path, Vec::new())?)?;
    engine.handle_command(ControlCommand::new(CommandKind::Start))?;
    engine.run_until_stopped()?;

    let text = std::fs::read_to_string(&path)?;
    let cut = text.trim_end().len() - 20;
    let torn = &text[..cut];
    let parsed = parse_log(torn)?;
    println!("{} lines on disk, torn line dropped: {}", text.lines().count(), parsed.dropped_torn_line);

    let replayed = RunEngine::replay(parsed.entries, ds)?;
    println!("live run: {} trials, replayed: {} trials", engine.trials().len(), replayed.trials().len());
    assert_eq!(replayed.trials(), &engine.trials()[..replayed.trials().len()]);
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
