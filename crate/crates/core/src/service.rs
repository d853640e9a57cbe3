//! Dataset and run store with one background search loop per running run.
//!
//! Storage lives under an optional root directory:
//!
//! ```text
//! <root>/datasets/<id>.csv    uploaded bytes, unchanged
//! <root>/datasets/<id>.json   descriptor (name, positive class)
//! <root>/runs/<run-id>.jsonl  trial log
//! ```
//!
//! Without a root everything stays in memory. Each run keeps its engine
//! behind a mutex that is held only between trials; readers get an immutable
//! snapshot published after every change.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, Dataset, DatasetDescriptor};
use crate::error::{ErrorCode, Rejection, Result};
use crate::orchestrator::{
    parse_log, Budget, CommandKind, CommandOutcome, ControlCommand, Run, RunEngine, RunSettings, RunSpec,
    RunStatus, Trial, TrialLog, DEFAULT_MAX_TRIALS, DEFAULT_METRIC,
};
use crate::space::{SearchSpace, SpaceDelta};

/// Body of `POST /runs`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    pub dataset_id: String,
    /// Full space to start from; the built-in space when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SearchSpace>,
    /// Keep only these algorithms enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithms: Option<Vec<String>>,
    /// Further edits applied before the run is created.
    #[serde(default, alias = "deltas", skip_serializing_if = "Vec::is_empty")]
    pub delta: Vec<SpaceDelta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<Budget>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<RunSettings>,
    /// Issue `start` right after creation.
    #[serde(default)]
    pub start: bool,
}

impl RunRequest {
    pub fn new(dataset_id: &str, max_trials: u64, seed: u64) -> Self {
        Self {
            dataset_id: dataset_id.to_string(),
            budget: Some(Budget::trials(max_trials)),
            seed,
            ..Self::default()
        }
    }

    fn space(&self) -> Result<SearchSpace> {
        let mut space = self.space.clone().unwrap_or_else(SearchSpace::builtin);
        if let Some(keep) = &self.algorithms {
            for name in keep {
                if space.algorithm(name).is_none() {
                    return Err(Rejection::new(ErrorCode::UnknownTarget, format!("unknown algorithm {name}")));
                }
            }
            let mut deltas = Vec::new();
            for alg in &space.algorithms {
                if keep.contains(&alg.name) {
                    deltas.push(SpaceDelta::enable_algorithm(&alg.name));
                } else {
                    deltas.push(SpaceDelta::disable_algorithm(&alg.name));
                }
            }
            space = space.apply_deltas(&deltas)?;
        }
        if !self.delta.is_empty() {
            space = space.apply_deltas(&self.delta)?;
        }
        Ok(space)
    }
}

/// Read-only view of a run published after every trial and command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSnapshot {
    pub run: Run,
    /// `run.status`, or `pausing` while a pause waits for the in-flight trial.
    pub reported_status: String,
    pub n_trials: usize,
    pub in_flight: Option<u64>,
    pub space_version: u64,
    pub notices: Vec<String>,
    #[serde(skip)]
    pub trials: Vec<Trial>,
}

impl RunSnapshot {
    fn of(engine: &RunEngine) -> Self {
        Self {
            run: engine.run().clone(),
            reported_status: engine.reported_status(),
            n_trials: engine.trials().len(),
            in_flight: engine.in_flight(),
            space_version: engine.space_version(),
            notices: engine.notices().to_vec(),
            trials: engine.trials().to_vec(),
        }
    }

    pub fn latest_trial_id(&self) -> u64 {
        self.trials.last().map_or(0, |t| t.trial_id)
    }

    /// Trials with an id above `since`, in order.
    pub fn trials_since(&self, since: u64) -> &[Trial] {
        // ids are 1..=n without gaps
        let start = (since as usize).min(self.trials.len());
        &self.trials[start..]
    }
}

struct Inner {
    engine: RunEngine,
    worker_active: bool,
}

/// One run: its engine, its published snapshot and its worker thread.
pub struct RunHandle {
    inner: Mutex<Inner>,
    snapshot: RwLock<Arc<RunSnapshot>>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl RunHandle {
    fn new(engine: RunEngine) -> Arc<Self> {
        let snapshot = Arc::new(RunSnapshot::of(&engine));
        Arc::new(Self {
            inner: Mutex::new(Inner {
                engine,
                worker_active: false,
            }),
            snapshot: RwLock::new(snapshot),
            workers: Mutex::new(Vec::new()),
        })
    }

    pub fn snapshot(&self) -> Arc<RunSnapshot> {
        self.snapshot.read().clone()
    }

    fn publish(&self, engine: &RunEngine) {
        *self.snapshot.write() = Arc::new(RunSnapshot::of(engine));
    }

    /// Full log text as JSON lines.
    pub fn log_text(&self) -> String {
        self.inner.lock().engine.log().to_jsonl()
    }

    pub fn command(self: &Arc<Self>, cmd: ControlCommand) -> Result<CommandOutcome> {
        let mut inner = self.inner.lock();
        let outcome = inner.engine.handle_command(cmd)?;
        self.ensure_worker(&mut inner);
        self.publish(&inner.engine);
        Ok(outcome)
    }

    fn ensure_worker(self: &Arc<Self>, inner: &mut Inner) {
        if inner.engine.run().status == RunStatus::Running && !inner.worker_active {
            inner.worker_active = true;
            let me = Arc::clone(self);
            let handle = std::thread::Builder::new()
                .name(format!("search-{}", inner.engine.run().id))
                .spawn(move || me.work())
                .expect("spawn search thread");
            self.workers.lock().push(handle);
        }
    }

    fn work(&self) {
        loop {
            let (plan, dataset, folds) = {
                let mut inner = self.inner.lock();
                let prepared = inner.engine.prepare();
                match prepared {
                    Ok(Some(plan)) => {
                        let d = inner.engine.dataset().clone();
                        let f = inner.engine.folds().clone();
                        self.publish(&inner.engine);
                        (plan, d, f)
                    }
                    Ok(None) => {
                        inner.worker_active = false;
                        self.publish(&inner.engine);
                        return;
                    }
                    Err(e) => {
                        tracing::error!(error = %e, "search loop stopped");
                        let _ = inner.engine.fail(&e.message);
                        inner.worker_active = false;
                        self.publish(&inner.engine);
                        return;
                    }
                }
            };
            let eval = plan.evaluate(&dataset, &folds);
            let mut inner = self.inner.lock();
            if let Err(e) = inner.engine.commit(plan, eval) {
                tracing::error!(error = %e, "could not record trial");
                let _ = inner.engine.fail(&e.message);
                inner.worker_active = false;
                self.publish(&inner.engine);
                return;
            }
            self.publish(&inner.engine);
        }
    }

    /// Blocks until no search loop is active for this run.
    pub fn wait_idle(&self) {
        loop {
            let next = self.workers.lock().pop();
            match next {
                Some(h) => {
                    let _ = h.join();
                }
                None if !self.inner.lock().worker_active => return,
                None => std::thread::sleep(Duration::from_millis(5)),
            }
        }
    }
}

/// Datasets and runs, optionally persisted under a root directory.
pub struct Store {
    root: Option<PathBuf>,
    datasets: RwLock<BTreeMap<String, Arc<Dataset>>>,
    runs: RwLock<BTreeMap<String, Arc<RunHandle>>>,
    create_lock: Mutex<()>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DatasetMeta {
    name: String,
    positive_class: String,
}

impl Store {
    pub fn in_memory() -> Self {
        Self {
            root: None,
            datasets: RwLock::new(BTreeMap::new()),
            runs: RwLock::new(BTreeMap::new()),
            create_lock: Mutex::new(()),
        }
    }

    /// Opens (creating if needed) a store rooted at `root` and reloads every
    /// dataset and run found there. Runs that were running come back paused.
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root.join("datasets"))?;
        fs::create_dir_all(root.join("runs"))?;
        let store = Self {
            root: Some(root.to_path_buf()),
            ..Self::in_memory()
        };
        for path in sorted_files(&root.join("datasets"), "csv")? {
            let bytes = fs::read(&path)?;
            let meta: Option<DatasetMeta> = fs::read(path.with_extension("json"))
                .ok()
                .and_then(|b| serde_json::from_slice(&b).ok());
            let name = meta.as_ref().map_or_else(|| stem(&path), |m| m.name.clone());
            let mut ds = load_csv(&bytes, &name)?;
            if let Some(m) = meta {
                ds.set_positive_class(&m.positive_class)?;
            }
            store.datasets.write().insert(ds.id.clone(), Arc::new(ds));
        }
        for path in sorted_files(&root.join("runs"), "jsonl")? {
            let handle = store.load_run(&path)?;
            let id = handle.snapshot().run.id.clone();
            store.runs.write().insert(id, handle);
        }
        Ok(store)
    }

    fn load_run(&self, path: &Path) -> Result<Arc<RunHandle>> {
        let text = fs::read_to_string(path)?;
        let parsed = parse_log(&text).map_err(|e| {
            Rejection::new(e.code, format!("{}: {}", path.display(), e.message))
        })?;
        if parsed.dropped_torn_line {
            let clean = TrialLog::with_entries(parsed.entries.clone()).to_jsonl();
            fs::write(path, clean)?;
        }
        let dataset_id = match parsed.entries.first().map(|e| &e.record) {
            Some(crate::orchestrator::Record::RunCreated { run }) => run.dataset_id.clone(),
            _ => return Err(Rejection::new(ErrorCode::CorruptLog, format!("{}: missing run_created", path.display()))),
        };
        let dataset = self.dataset(&dataset_id)?;
        let entries = parsed.entries;
        let mut engine = RunEngine::replay(entries.clone(), dataset)?;
        engine.attach_log(TrialLog::open_file(path, entries)?);
        engine.suspend("process restarted while running")?;
        Ok(RunHandle::new(engine))
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn add_dataset(&self, bytes: &[u8], name: &str, positive_class: Option<&str>) -> Result<DatasetDescriptor> {
        let mut ds = load_csv(bytes, name)?;
        if let Some(p) = positive_class {
            ds.set_positive_class(p)?;
        }
        if let Some(existing) = self.datasets.read().get(&ds.id) {
            return Ok(existing.descriptor());
        }
        if let Some(root) = &self.root {
            let base = root.join("datasets").join(&ds.id);
            fs::write(base.with_extension("csv"), bytes)?;
            let meta = DatasetMeta {
                name: ds.name.clone(),
                positive_class: ds.classes[ds.positive_class].clone(),
            };
            fs::write(base.with_extension("json"), serde_json::to_vec_pretty(&meta).expect("serializable"))?;
        }
        let descriptor = ds.descriptor();
        self.datasets.write().insert(ds.id.clone(), Arc::new(ds));
        Ok(descriptor)
    }

    pub fn dataset(&self, id: &str) -> Result<Arc<Dataset>> {
        self.datasets
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| Rejection::new(ErrorCode::UnknownDataset, format!("unknown dataset {id}")))
    }

    pub fn datasets(&self) -> Vec<DatasetDescriptor> {
        self.datasets.read().values().map(|d| d.descriptor()).collect()
    }

    pub fn create_run(&self, req: &RunRequest) -> Result<Arc<RunHandle>> {
        let dataset = self.dataset(&req.dataset_id)?;
        let spec = RunSpec {
            space: req.space()?,
            budget: req.budget.clone().unwrap_or_else(|| Budget::trials(DEFAULT_MAX_TRIALS)),
            seed: req.seed,
            metric: req.metric.clone().unwrap_or_else(|| DEFAULT_METRIC.to_string()),
            settings: req.settings.clone().unwrap_or_default(),
        };
        let _guard = self.create_lock.lock();
        let id = format!("run-{:04}", self.runs.read().len() + 1);
        let log = match &self.root {
            Some(root) => TrialLog::open_file(&root.join("runs").join(format!("{id}.jsonl")), Vec::new())?,
            None => TrialLog::in_memory(),
        };
        let engine = RunEngine::create(&id, dataset, spec, log)?;
        let handle = RunHandle::new(engine);
        self.runs.write().insert(id, handle.clone());
        if req.start {
            handle.command(ControlCommand::new(CommandKind::Start))?;
        }
        Ok(handle)
    }

    pub fn run(&self, id: &str) -> Result<Arc<RunHandle>> {
        self.runs
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| Rejection::new(ErrorCode::UnknownRun, format!("unknown run {id}")))
    }

    pub fn runs(&self) -> Vec<Arc<RunSnapshot>> {
        self.runs.read().values().map(|h| h.snapshot()).collect()
    }

    /// Pauses every running run and waits for in-flight trials to land.
    pub fn shutdown(&self) {
        let handles: Vec<Arc<RunHandle>> = self.runs.read().values().cloned().collect();
        for h in &handles {
            if h.snapshot().run.status == RunStatus::Running {
                if let Err(e) = h.command(ControlCommand::new(CommandKind::Pause)) {
                    tracing::debug!(error = %e, "pause on shutdown skipped");
                }
            }
        }
        for h in &handles {
            h.wait_idle();
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string()
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some(ext))
        .collect();
    files.sort();
    Ok(files)
}
