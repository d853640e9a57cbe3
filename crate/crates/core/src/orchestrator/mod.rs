//! Run lifecycle: budget accounting, the select → propose → evaluate → record
//! loop, control commands applied at trial boundaries, and log replay.

pub mod log;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::bandit::{BanditSettings, BanditState};
use crate::classifiers::{cross_val_f1, stratified_folds, EvalResult, EvalStatus, FoldPlan, ModelSpec};
use crate::data::Dataset;
use crate::error::{ErrorCode, Rejection, Result};
use crate::seed::mix_seed;
use crate::space::{Configuration, DeltaKind, Hyperpartition, SearchSpace, SpaceDelta};
use crate::tuner::{TunerSettings, TunerState};

pub use log::{parse_log, trials_to_csv, LogEntry, ParsedLog, Record, TrialLog};

pub const DEFAULT_METRIC: &str = "f1_cv10";
pub const DEFAULT_MAX_TRIALS: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Created,
    Running,
    Paused,
    Finished,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Created => "created",
            RunStatus::Running => "running",
            RunStatus::Paused => "paused",
            RunStatus::Finished => "finished",
            RunStatus::Failed => "failed",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, RunStatus::Finished | RunStatus::Failed)
    }
}

/// Trial and wall-clock limits plus what has been used. Wall clock is the sum
/// of trial evaluation times, so it survives pause/resume and log replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    #[serde(default)]
    pub max_trials: Option<u64>,
    #[serde(default)]
    pub max_wall_clock_secs: Option<f64>,
    #[serde(default)]
    pub consumed_trials: u64,
    #[serde(default)]
    pub consumed_wall_clock_secs: f64,
}

impl Budget {
    pub fn trials(max: u64) -> Self {
        Self {
            max_trials: Some(max),
            max_wall_clock_secs: None,
            consumed_trials: 0,
            consumed_wall_clock_secs: 0.0,
        }
    }

    pub fn wall_clock(secs: f64) -> Self {
        Self {
            max_trials: None,
            max_wall_clock_secs: Some(secs),
            ..Self::trials(0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_trials.is_none() && self.max_wall_clock_secs.is_none() {
            return Err(Rejection::new(ErrorCode::InvalidBudget, "budget needs a trial or wall-clock limit"));
        }
        if self.max_wall_clock_secs.is_some_and(|s| !s.is_finite() || s <= 0.0) {
            return Err(Rejection::new(ErrorCode::InvalidBudget, "wall-clock limit must be positive"));
        }
        Ok(())
    }

    pub fn exhausted(&self) -> bool {
        self.max_trials.is_some_and(|m| self.consumed_trials >= m)
            || self
                .max_wall_clock_secs
                .is_some_and(|m| self.consumed_wall_clock_secs >= m)
    }

    /// Raises limits; consumption is untouched. A missing limit becomes
    /// `consumed + increment`.
    pub fn extend(&mut self, inc: &BudgetIncrement) {
        if let Some(extra) = inc.max_trials {
            let base = self.max_trials.unwrap_or(self.consumed_trials);
            self.max_trials = Some(base + extra);
        }
        if let Some(extra) = inc.max_wall_clock_secs {
            let base = self.max_wall_clock_secs.unwrap_or(self.consumed_wall_clock_secs);
            self.max_wall_clock_secs = Some(base + extra);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BudgetIncrement {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_wall_clock_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunSettings {
    #[serde(default)]
    pub bandit: BanditSettings,
    #[serde(default)]
    pub tuner: TunerSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub id: String,
    pub dataset_id: String,
    pub space: SearchSpace,
    pub budget: Budget,
    pub status: RunStatus,
    pub seed: u64,
    pub metric: String,
    #[serde(default)]
    pub settings: RunSettings,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
}

/// Everything a caller chooses when creating a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub space: SearchSpace,
    pub budget: Budget,
    pub seed: u64,
    pub metric: String,
    pub settings: RunSettings,
}

impl RunSpec {
    pub fn new(space: SearchSpace, budget: Budget, seed: u64) -> Self {
        Self {
            space,
            budget,
            seed,
            metric: DEFAULT_METRIC.to_string(),
            settings: RunSettings::default(),
        }
    }

    pub fn metric(mut self, metric: &str) -> Self {
        self.metric = metric.to_string();
        self
    }
}

/// Fold count encoded in a metric name of the form `f1_cv<k>`.
pub fn metric_folds(metric: &str) -> Result<usize> {
    metric
        .strip_prefix("f1_cv")
        .and_then(|k| k.parse::<usize>().ok())
        .filter(|&k| k >= 2)
        .ok_or_else(|| {
            Rejection::new(ErrorCode::InvalidMetric, format!("unsupported metric {metric}; expected f1_cv<k>"))
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Error,
}

/// One trained-and-evaluated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_id: u64,
    pub run_id: String,
    pub algorithm: String,
    pub hyperpartition_id: String,
    pub config: Configuration,
    pub score: Option<f64>,
    pub fold_scores: Vec<f64>,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_secs: f64,
    pub created_at: DateTime<Utc>,
    /// Number of reconfigurations applied before this trial was issued.
    pub space_version: u64,
    pub seed: u64,
}

impl Trial {
    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }

    /// The search-relevant part of a trial, excluding timing.
    pub fn fingerprint(&self) -> (u64, &str, &Configuration, Option<f64>, &[f64], u64) {
        (
            self.trial_id,
            &self.hyperpartition_id,
            &self.config,
            self.score,
            &self.fold_scores,
            self.seed,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Start,
    Pause,
    Resume,
    Stop,
    Reconfigure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub kind: CommandKind,
    #[serde(default, alias = "deltas", skip_serializing_if = "Vec::is_empty")]
    pub delta: Vec<SpaceDelta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extend_budget: Option<BudgetIncrement>,
}

impl ControlCommand {
    pub fn new(kind: CommandKind) -> Self {
        Self {
            kind,
            delta: Vec::new(),
            extend_budget: None,
        }
    }

    pub fn reconfigure(delta: Vec<SpaceDelta>) -> Self {
        Self {
            delta,
            ..Self::new(CommandKind::Reconfigure)
        }
    }

    pub fn with_budget(mut self, inc: BudgetIncrement) -> Self {
        self.extend_budget = Some(inc);
        self
    }
}

fn invalid_transition(from: RunStatus, kind: CommandKind) -> Rejection {
    Rejection::new(
        ErrorCode::InvalidTransition,
        format!("cannot {kind:?} a {} run", from.as_str()).to_lowercase(),
    )
}

/// Status after `kind`, or a rejection for an illegal transition.
fn next_status(from: RunStatus, kind: CommandKind) -> Result<RunStatus> {
    use CommandKind as K;
    use RunStatus as S;
    match (kind, from) {
        (K::Start, S::Created) => Ok(S::Running),
        (K::Pause, S::Running) => Ok(S::Paused),
        (K::Resume, S::Paused) => Ok(S::Running),
        (K::Stop, S::Running | S::Paused) => Ok(S::Finished),
        (K::Reconfigure, s) if !s.is_terminal() => Ok(s),
        (kind, from) => Err(invalid_transition(from, kind)),
    }
}

/// The run state `cmd` would produce, computed without touching anything.
fn project(status: RunStatus, space: &SearchSpace, budget: &Budget, cmd: &ControlCommand) -> Result<(RunStatus, SearchSpace, Budget)> {
    match cmd.kind {
        CommandKind::Reconfigure if cmd.delta.is_empty() => {
            return Err(Rejection::new(ErrorCode::InvalidCommand, "reconfigure needs at least one delta"))
        }
        CommandKind::Reconfigure => {}
        _ if !cmd.delta.is_empty() => {
            return Err(Rejection::new(ErrorCode::InvalidCommand, "only reconfigure carries deltas"))
        }
        _ => {}
    }
    let status = next_status(status, cmd.kind)?;
    let space = space.apply_deltas(&cmd.delta)?;
    space.validate().into_result()?;
    let mut budget = budget.clone();
    if let Some(inc) = &cmd.extend_budget {
        budget.extend(inc);
    }
    Ok((status, space, budget))
}

/// Everything needed to evaluate a trial outside the run lock.
#[derive(Debug, Clone)]
pub struct TrialPlan {
    pub trial_id: u64,
    pub hyperpartition: Hyperpartition,
    pub config: Configuration,
    pub seed: u64,
    pub space_version: u64,
    pub model: Result<ModelSpec, String>,
}

impl TrialPlan {
    pub fn evaluate(&self, dataset: &Dataset, folds: &FoldPlan) -> EvalResult {
        match &self.model {
            Ok(spec) => cross_val_f1(dataset, spec, folds, self.seed),
            Err(message) => EvalResult {
                fold_scores: Vec::new(),
                mean_score: 0.0,
                elapsed: Default::default(),
                status: EvalStatus::Error(message.clone()),
            },
        }
    }
}

/// What a control command did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandOutcome {
    /// Reported status: `pausing` while a pause waits for the in-flight trial.
    pub status: String,
    pub queued: bool,
}

/// Mutable state of one run. Not thread-safe by itself; the service wraps it
/// in a lock and evaluates trials outside that lock via [`TrialPlan`].
#[derive(Debug)]
pub struct RunEngine {
    run: Run,
    dataset: Arc<Dataset>,
    folds: Arc<FoldPlan>,
    bandit: BanditState,
    tuners: BTreeMap<String, TunerState>,
    trials: Vec<Trial>,
    log: TrialLog,
    space_version: u64,
    pending: VecDeque<ControlCommand>,
    in_flight: Option<u64>,
    notices: Vec<String>,
}

impl RunEngine {
    /// Validates inputs and writes the `run_created` record.
    pub fn create(id: &str, dataset: Arc<Dataset>, spec: RunSpec, log: TrialLog) -> Result<Self> {
        let RunSpec { space, mut budget, seed, metric, settings } = spec;
        space.validate().into_result()?;
        budget.consumed_trials = 0;
        budget.consumed_wall_clock_secs = 0.0;
        budget.validate()?;
        let now = Utc::now();
        let run = Run {
            id: id.to_string(),
            dataset_id: dataset.id.clone(),
            space,
            budget,
            status: RunStatus::Created,
            seed,
            metric,
            settings,
            created_at: now,
            updated_at: now,
            failure_reason: None,
        };
        let mut engine = Self::from_header(run.clone(), dataset, log)?;
        engine.log.append(Record::RunCreated { run })?;
        Ok(engine)
    }

    fn from_header(run: Run, dataset: Arc<Dataset>, log: TrialLog) -> Result<Self> {
        let folds = stratified_folds(&dataset, metric_folds(&run.metric)?, run.seed)?;
        let bandit = BanditState::new(
            run.space.enabled_hyperpartitions().iter().map(|hp| hp.id.clone()),
            run.settings.bandit,
        );
        Ok(Self {
            run,
            dataset,
            folds: Arc::new(folds),
            bandit,
            tuners: BTreeMap::new(),
            trials: Vec::new(),
            log,
            space_version: 0,
            pending: VecDeque::new(),
            in_flight: None,
            notices: Vec::new(),
        })
    }

    /// Rebuilds a run from its log: space, budget, status, bandit and tuner
    /// state all come out exactly as they were when the last record was written.
    pub fn replay(entries: Vec<LogEntry>, dataset: Arc<Dataset>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Rejection::new(ErrorCode::CorruptLog, "log has no run_created record"));
        };
        let Record::RunCreated { run } = &first.record else {
            return Err(Rejection::new(ErrorCode::CorruptLog, "line 1: first record must be run_created"));
        };
        if run.dataset_id != dataset.id {
            return Err(Rejection::new(ErrorCode::UnknownDataset, format!("log expects dataset {}", run.dataset_id)));
        }
        let mut engine = Self::from_header(run.clone(), dataset, TrialLog::in_memory())?;
        for (line, entry) in entries.iter().enumerate().skip(1) {
            let at = |m: String| Rejection::new(ErrorCode::CorruptLog, format!("line {}: {m}", line + 1));
            match &entry.record {
                Record::RunCreated { .. } => return Err(at("duplicate run_created".into())),
                Record::Trial { trial } => {
                    if trial.trial_id != engine.trials.len() as u64 + 1 {
                        return Err(at(format!("trial {} out of order", trial.trial_id)));
                    }
                    engine.absorb(trial.clone()).map_err(|e| at(e.message))?;
                }
                Record::Command { command, .. } => {
                    engine.apply_effects(command).map_err(|e| at(e.message))?;
                }
                Record::StatusChange { to, reason, .. } => {
                    engine.run.status = *to;
                    if *to == RunStatus::Failed {
                        engine.run.failure_reason = reason.clone();
                    }
                }
            }
        }
        if let Some(last) = entries.last() {
            if let Record::Trial { trial } = &last.record {
                engine.run.updated_at = trial.created_at;
            }
        }
        engine.log = TrialLog::with_entries(entries);
        Ok(engine)
    }

    /// Redirects future records to `log`, which must already hold the same entries.
    pub fn attach_log(&mut self, log: TrialLog) {
        debug_assert_eq!(log.entries().len(), self.log.entries().len());
        self.log = log;
    }

    pub fn run(&self) -> &Run {
        &self.run
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn bandit(&self) -> &BanditState {
        &self.bandit
    }

    pub fn tuners(&self) -> &BTreeMap<String, TunerState> {
        &self.tuners
    }

    pub fn log(&self) -> &TrialLog {
        &self.log
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn folds(&self) -> &Arc<FoldPlan> {
        &self.folds
    }

    pub fn space_version(&self) -> u64 {
        self.space_version
    }

    pub fn notices(&self) -> &[String] {
        &self.notices
    }

    pub fn in_flight(&self) -> Option<u64> {
        self.in_flight
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// `pausing` while a queued pause waits for the in-flight trial.
    pub fn reported_status(&self) -> String {
        let pausing = self.in_flight.is_some()
            && self.run.status == RunStatus::Running
            && self.pending.iter().any(|c| matches!(c.kind, CommandKind::Pause | CommandKind::Stop));
        if pausing {
            "pausing".into()
        } else {
            self.run.status.as_str().into()
        }
    }

    fn set_status(&mut self, to: RunStatus, reason: Option<String>) -> Result<()> {
        let from = self.run.status;
        if from == to {
            return Ok(());
        }
        self.run.status = to;
        self.run.updated_at = Utc::now();
        if to == RunStatus::Failed {
            self.run.failure_reason = reason.clone();
        }
        self.log.append(Record::StatusChange { from, to, reason })
    }

    /// Marks the run failed; allowed from any state.
    pub fn fail(&mut self, reason: &str) -> Result<()> {
        self.set_status(RunStatus::Failed, Some(reason.to_string()))
    }

    /// Moves a running run to paused without a command record. Used when a
    /// log is reloaded after the process stopped mid-run.
    pub fn suspend(&mut self, reason: &str) -> Result<()> {
        if self.run.status == RunStatus::Running {
            self.set_status(RunStatus::Paused, Some(reason.to_string()))?;
        }
        Ok(())
    }

    fn projected(&self) -> Result<(RunStatus, SearchSpace, Budget)> {
        let mut state = (self.run.status, self.run.space.clone(), self.run.budget.clone());
        for cmd in &self.pending {
            state = project(state.0, &state.1, &state.2, cmd)?;
        }
        Ok(state)
    }

    /// Validates a command against the state it will see and applies it now,
    /// or queues it if a trial is in flight.
    pub fn handle_command(&mut self, cmd: ControlCommand) -> Result<CommandOutcome> {
        let (status, space, budget) = self.projected()?;
        project(status, &space, &budget, &cmd)?;
        if self.in_flight.is_some() {
            self.pending.push_back(cmd);
            return Ok(CommandOutcome {
                status: self.reported_status(),
                queued: true,
            });
        }
        self.apply_command(&cmd)?;
        Ok(CommandOutcome {
            status: self.reported_status(),
            queued: false,
        })
    }

    fn apply_command(&mut self, cmd: &ControlCommand) -> Result<()> {
        let to = next_status(self.run.status, cmd.kind)?;
        self.apply_effects(cmd)?;
        self.log.append(Record::Command {
            command: cmd.clone(),
            space_version: self.space_version,
        })?;
        self.run.updated_at = Utc::now();
        self.set_status(to, None)
    }

    /// Non-status effects of a command. The caller handles the status.
    fn apply_effects(&mut self, cmd: &ControlCommand) -> Result<()> {
        if cmd.kind == CommandKind::Reconfigure {
            let before: BTreeSet<String> =
                self.run.space.enabled_hyperpartitions().into_iter().map(|h| h.id).collect();
            let space = self.run.space.apply_deltas(&cmd.delta)?;
            space.validate().into_result()?;
            let enabled_targets: BTreeSet<&str> = cmd
                .delta
                .iter()
                .filter(|d| matches!(d.kind, DeltaKind::EnableAlgorithm | DeltaKind::EnableHyperpartition))
                .map(|d| d.target.as_str())
                .collect();
            for hp in space.hyperpartitions() {
                let now_on = space.is_enabled(&hp);
                let touched = enabled_targets.contains(hp.id.as_str())
                    || enabled_targets.contains(hp.algorithm.as_str());
                if now_on != before.contains(&hp.id) || (now_on && touched) {
                    self.bandit.ensure_arm(&hp.id);
                    self.bandit.set_active(&hp.id, now_on)?;
                }
            }
            self.run.space = space;
            self.space_version += 1;
        }
        if let Some(inc) = &cmd.extend_budget {
            self.run.budget.extend(inc);
        }
        Ok(())
    }

    /// Books a finished trial into bandit, tuner, budget and the trial list.
    fn absorb(&mut self, trial: Trial) -> Result<()> {
        let hp = self
            .run
            .space
            .hyperpartition(&trial.hyperpartition_id)
            .ok_or_else(|| Rejection::new(ErrorCode::UnknownTarget, format!("unknown hyperpartition {}", trial.hyperpartition_id)))?;
        self.bandit.ensure_arm(&hp.id);
        match (trial.status, trial.score) {
            (TrialStatus::Ok, Some(score)) => {
                self.bandit.record(&hp.id, score)?;
                self.tuners
                    .entry(hp.id.clone())
                    .or_insert_with(|| TunerState::new(&hp.id))
                    .observe(&hp, &trial.config, score);
            }
            _ => {
                if self.bandit.record_failure(&hp.id)? {
                    self.notices.push(format!(
                        "{} deactivated after repeated evaluation failures",
                        hp.id
                    ));
                }
            }
        }
        self.run.budget.consumed_trials += 1;
        self.run.budget.consumed_wall_clock_secs += trial.elapsed_secs;
        self.trials.push(trial);
        Ok(())
    }

    /// Chooses the next trial, or `None` when the run is not running. Finishes
    /// the run when the budget is used up and fails it when no arm is left.
    pub fn prepare(&mut self) -> Result<Option<TrialPlan>> {
        if self.run.status != RunStatus::Running || self.in_flight.is_some() {
            return Ok(None);
        }
        if self.run.budget.exhausted() {
            self.set_status(RunStatus::Finished, Some("budget exhausted".into()))?;
            return Ok(None);
        }
        let id = match self.bandit.select() {
            Ok(id) => id,
            Err(e) => {
                self.fail(&e.message)?;
                return Ok(None);
            }
        };
        let hp = self
            .run
            .space
            .hyperpartition(&id)
            .ok_or_else(|| Rejection::new(ErrorCode::UnknownTarget, format!("unknown hyperpartition {id}")))?;
        let trial_id = self.trials.len() as u64 + 1;
        let seed = mix_seed(self.run.seed, trial_id);
        let config = self
            .tuners
            .get(&id)
            .cloned()
            .unwrap_or_else(|| TunerState::new(&id))
            .propose(&hp, &self.run.space, &self.run.settings.tuner, seed);
        let model = ModelSpec::build(&hp.algorithm, &hp.assignment, &config).map_err(|e| e.message);
        self.in_flight = Some(trial_id);
        Ok(Some(TrialPlan {
            trial_id,
            hyperpartition: hp,
            config,
            seed,
            space_version: self.space_version,
            model,
        }))
    }

    /// Records an evaluated plan, then applies queued commands and checks the budget.
    pub fn commit(&mut self, plan: TrialPlan, eval: EvalResult) -> Result<Trial> {
        if self.in_flight != Some(plan.trial_id) {
            return Err(Rejection::new(ErrorCode::InvalidTransition, "no matching trial in flight"));
        }
        let (status, score, error) = match &eval.status {
            EvalStatus::Ok => (TrialStatus::Ok, Some(eval.mean_score), None),
            EvalStatus::Error(m) => (TrialStatus::Error, None, Some(m.clone())),
        };
        let trial = Trial {
            trial_id: plan.trial_id,
            run_id: self.run.id.clone(),
            algorithm: plan.hyperpartition.algorithm.clone(),
            hyperpartition_id: plan.hyperpartition.id.clone(),
            config: plan.config,
            score,
            fold_scores: eval.fold_scores,
            status,
            error,
            elapsed_secs: eval.elapsed.as_secs_f64(),
            created_at: Utc::now(),
            space_version: plan.space_version,
            seed: plan.seed,
        };
        self.log.append(Record::Trial { trial: trial.clone() })?;
        self.in_flight = None;
        self.run.updated_at = trial.created_at;
        self.absorb(trial.clone())?;
        while let Some(cmd) = self.pending.pop_front() {
            if let Err(e) = self.apply_command(&cmd) {
                tracing::warn!(error = %e, "dropping queued command that no longer applies");
            }
        }
        if self.run.status == RunStatus::Running && self.run.budget.exhausted() {
            self.set_status(RunStatus::Finished, Some("budget exhausted".into()))?;
        }
        Ok(trial)
    }

    /// Abandons an in-flight plan without recording it.
    pub fn abandon(&mut self, plan: &TrialPlan) {
        if self.in_flight == Some(plan.trial_id) {
            self.in_flight = None;
        }
    }

    /// Runs one full trial synchronously.
    pub fn step(&mut self) -> Result<Option<Trial>> {
        let Some(plan) = self.prepare()? else {
            return Ok(None);
        };
        let eval = plan.evaluate(&self.dataset, &self.folds);
        self.commit(plan, eval).map(Some)
    }

    /// Steps until the run leaves the running state.
    pub fn run_until_stopped(&mut self) -> Result<usize> {
        let mut n = 0;
        while self.step()?.is_some() {
            n += 1;
        }
        Ok(n)
    }
}
