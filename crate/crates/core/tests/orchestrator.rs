mod common;

use std::collections::BTreeMap;

use autosteer::orchestrator::{
    parse_log, BudgetIncrement, CommandKind, ControlCommand, Record, RunEngine, RunStatus, TrialLog,
};
use autosteer::space::{contains, SearchSpace, SpaceDelta};
use autosteer::summary::full_summary;
use autosteer::ErrorCode;
use common::{quick_spec, small_dataset, started_engine};
use proptest::prelude::*;

fn summary_json(e: &RunEngine) -> String {
    serde_json::to_string(&full_summary(e.trials(), &e.run().space, 10)).unwrap()
}

fn assert_replay_equivalent(live: &RunEngine) {
    let text = live.log().to_jsonl();
    let parsed = parse_log(&text).unwrap();
    assert!(!parsed.dropped_torn_line);
    let replayed = RunEngine::replay(parsed.entries, small_dataset()).unwrap();
    assert_eq!(summary_json(&replayed), summary_json(live));
    assert_eq!(replayed.trials(), live.trials());
    assert_eq!(replayed.bandit(), live.bandit());
    assert_eq!(replayed.tuners(), live.tuners());
    assert_eq!(replayed.run().budget, live.run().budget);
    assert_eq!(replayed.run().space, live.run().space);
    assert_eq!(replayed.run().status, live.run().status);
    assert_eq!(replayed.space_version(), live.space_version());
}

#[test]
fn replay_equivalence_at_checkpoints() {
    let created = RunEngine::create("run-0001", small_dataset(), quick_spec(10, 1), TrialLog::in_memory()).unwrap();
    assert_eq!(created.run().status, RunStatus::Created);
    assert_replay_equivalent(&created);

    for n in [1u64, 17, 250] {
        let mut e = started_engine(n, 42, TrialLog::in_memory());
        assert_eq!(e.run_until_stopped().unwrap() as u64, n);
        assert_eq!(e.run().status, RunStatus::Finished);
        assert_replay_equivalent(&e);
    }
}

#[test]
fn replay_through_commands_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let mut e = started_engine(40, 9, TrialLog::open_file(&path, Vec::new()).unwrap());
    for _ in 0..8 {
        e.step().unwrap();
    }
    e.handle_command(ControlCommand::new(CommandKind::Pause)).unwrap();
    e.handle_command(ControlCommand::reconfigure(vec![
        SpaceDelta::disable_algorithm("KNN"),
        SpaceDelta::set_range("ExtraTrees", "max_features", 0.7, 1.0),
    ]))
    .unwrap();
    e.handle_command(ControlCommand::new(CommandKind::Resume).with_budget(BudgetIncrement { max_trials: Some(5), max_wall_clock_secs: None }))
        .unwrap();
    for _ in 0..9 {
        e.step().unwrap();
    }
    assert_eq!(e.trials().len(), 17);
    assert_replay_equivalent(&e);

    let from_file = parse_log(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(from_file.entries, e.log().entries());
}

#[test]
fn torn_final_line_is_dropped() {
    let mut e = started_engine(50, 3, TrialLog::in_memory());
    e.run_until_stopped().unwrap();
    let text = e.log().to_jsonl();
    let lines: Vec<&str> = text.lines().collect();
    let last_trial = lines.iter().rposition(|l| l.contains("\"kind\":\"trial\"")).unwrap();
    let mut torn = lines[..last_trial].join("\n");
    torn.push('\n');
    torn.push_str(&lines[last_trial][..lines[last_trial].len() / 2]);
    let parsed = parse_log(&torn).unwrap();
    assert!(parsed.dropped_torn_line);
    let replayed = RunEngine::replay(parsed.entries, small_dataset()).unwrap();
    assert_eq!(replayed.trials().len(), 49);
    assert_eq!(replayed.trials(), &e.trials()[..49]);
}

#[test]
fn corrupt_middle_line_reports_line_number() {
    let mut e = started_engine(5, 3, TrialLog::in_memory());
    e.run_until_stopped().unwrap();
    let mut lines: Vec<String> = e.log().to_jsonl().lines().map(String::from).collect();
    lines[3] = "{not json".into();
    let err = parse_log(&(lines.join("\n") + "\n")).unwrap_err();
    assert_eq!(err.code, ErrorCode::CorruptLog);
    assert!(err.message.starts_with("line 4:"), "{}", err.message);
}

#[test]
fn header_must_come_first() {
    let mut e = started_engine(2, 3, TrialLog::in_memory());
    e.run_until_stopped().unwrap();
    let entries = e.log().entries()[1..].to_vec();
    assert_eq!(RunEngine::replay(entries, small_dataset()).unwrap_err().code, ErrorCode::CorruptLog);
    assert_eq!(RunEngine::replay(Vec::new(), small_dataset()).unwrap_err().code, ErrorCode::CorruptLog);
}

#[test]
fn equal_seeds_give_equal_trial_sequences() {
    let run = |seed| {
        let mut e = started_engine(30, seed, TrialLog::in_memory());
        e.run_until_stopped().unwrap();
        e.trials().iter().map(|t| format!("{:?}", t.fingerprint())).collect::<Vec<_>>()
    };
    assert_eq!(run(77), run(77));
    assert_ne!(run(77), run(78));
}

#[test]
fn et_focus_workflow() {
    let mut e = started_engine(60, 5, TrialLog::in_memory());
    for _ in 0..20 {
        e.step().unwrap();
    }
    e.handle_command(ControlCommand::new(CommandKind::Pause)).unwrap();
    let others = ["KNN", "DecisionTree", "RandomForest", "SGDLogistic", "GaussianNB"];
    let mut deltas: Vec<SpaceDelta> = others.iter().map(|a| SpaceDelta::disable_algorithm(a)).collect();
    deltas.push(SpaceDelta::set_range("ExtraTrees", "max_features", 0.7, 1.0));
    e.handle_command(ControlCommand::reconfigure(deltas)).unwrap();
    e.handle_command(ControlCommand::new(CommandKind::Resume)).unwrap();
    e.run_until_stopped().unwrap();
    let later = &e.trials()[20..];
    assert_eq!(later.len(), 40);
    assert_eq!(later[0].trial_id, 21);
    for t in later {
        assert_eq!(t.algorithm, "ExtraTrees");
        let mf = t.config["max_features"];
        assert!((0.7..=1.0).contains(&mf), "max_features {mf}");
    }
}

#[test]
fn reenabled_hyperpartition_keeps_history() {
    let mut e = started_engine(40, 2, TrialLog::in_memory());
    for _ in 0..14 {
        e.step().unwrap();
    }
    let id = "GaussianNB";
    let before = e.bandit().arms[id].scores.clone();
    assert_eq!(before.len(), 1);
    e.handle_command(ControlCommand::reconfigure(vec![SpaceDelta::disable_algorithm(id)])).unwrap();
    assert!(!e.bandit().arms[id].active);
    for _ in 0..10 {
        assert_ne!(e.step().unwrap().unwrap().hyperpartition_id, id);
    }
    e.handle_command(ControlCommand::reconfigure(vec![SpaceDelta::enable_algorithm(id)])).unwrap();
    assert!(e.bandit().arms[id].active);
    assert_eq!(e.bandit().arms[id].scores, before);
}

#[derive(Debug, Clone)]
enum Op {
    Step,
    Pause,
    Resume,
    Stop,
    Extend(u64),
    Narrow(usize, f64, f64),
    Toggle(usize, bool),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        6 => Just(Op::Step),
        1 => Just(Op::Pause),
        1 => Just(Op::Resume),
        1 => Just(Op::Stop),
        1 => (0u64..4).prop_map(Op::Extend),
        2 => (0usize..64, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(i, a, b)| Op::Narrow(i, a.min(b), a.max(b))),
        1 => (0usize..6, any::<bool>()).prop_map(|(i, on)| Op::Toggle(i, on)),
    ]
}

fn narrow_delta(space: &SearchSpace, pick: usize, a: f64, b: f64) -> SpaceDelta {
    let hps = space.hyperpartitions();
    let tunables: Vec<_> = hps.iter().flat_map(|hp| hp.tunables.iter().map(move |t| (hp, t))).collect();
    let (hp, t) = tunables[pick % tunables.len()];
    let r = t.declared();
    let (lo, hi) = match t.scale {
        autosteer::space::Scale::Linear => (r.lo() + a * (r.hi() - r.lo()), r.lo() + b * (r.hi() - r.lo())),
        autosteer::space::Scale::Log => {
            let (l, h) = (r.lo().log10(), r.hi().log10());
            (10f64.powf(l + a * (h - l)), 10f64.powf(l + b * (h - l)))
        }
    };
    SpaceDelta::set_range(&hp.id, &t.name, lo, hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn budget_and_containment_hold_under_random_commands(seed in 0u64..1000, max in 1u64..25, ops in proptest::collection::vec(op(), 1..60)) {
        let mut e = started_engine(max, seed, TrialLog::in_memory());
        let algorithms = ["KNN", "DecisionTree", "RandomForest", "ExtraTrees", "SGDLogistic", "GaussianNB"];
        let mut spaces: BTreeMap<u64, SearchSpace> = BTreeMap::new();
        for op in ops {
            let space_now = e.run().space.clone();
            let version = e.space_version();
            let before = e.run().clone();
            let result = match op {
                Op::Step => e.step().map(|_| ()),
                Op::Pause => e.handle_command(ControlCommand::new(CommandKind::Pause)).map(|_| ()),
                Op::Resume => e.handle_command(ControlCommand::new(CommandKind::Resume)).map(|_| ()),
                Op::Stop => e.handle_command(ControlCommand::new(CommandKind::Stop)).map(|_| ()),
                Op::Extend(k) => e
                    .handle_command(ControlCommand::new(CommandKind::Pause).with_budget(BudgetIncrement { max_trials: Some(k), max_wall_clock_secs: None }))
                    .map(|_| ()),
                Op::Narrow(i, a, b) => e
                    .handle_command(ControlCommand::reconfigure(vec![narrow_delta(&space_now, i, a, b)]))
                    .map(|_| ()),
                Op::Toggle(i, on) => {
                    let d = if on { SpaceDelta::enable_algorithm(algorithms[i]) } else { SpaceDelta::disable_algorithm(algorithms[i]) };
                    e.handle_command(ControlCommand::reconfigure(vec![d])).map(|_| ())
                }
            };
            if result.is_err() {
                // a rejected command leaves the run untouched
                prop_assert_eq!(&e.run().space, &before.space);
                prop_assert_eq!(&e.run().budget, &before.budget);
                prop_assert_eq!(e.run().status, before.status);
            }
            spaces.entry(version).or_insert(space_now);
            let b = &e.run().budget;
            prop_assert!(b.max_trials.is_none_or(|m| b.consumed_trials <= m));
        }
        for t in e.trials() {
            let space = &spaces[&t.space_version];
            let hp = space.hyperpartition(&t.hyperpartition_id).unwrap();
            prop_assert!(space.is_enabled(&hp));
            prop_assert!(contains(&hp, space, &t.config).unwrap(), "trial {} outside its space", t.trial_id);
        }
        let ids: Vec<u64> = e.trials().iter().map(|t| t.trial_id).collect();
        prop_assert_eq!(ids, (1..=e.trials().len() as u64).collect::<Vec<_>>());
        let header_ok = matches!(e.log().entries()[0].record, Record::RunCreated { .. });
        prop_assert!(header_ok);
    }
}
