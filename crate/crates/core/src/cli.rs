//! Operator command line. Every verb goes through [`ApiClient`], either to a
//! remote server (`--server`) or to an in-process router over `--data-dir`.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::client::ApiClient;
use crate::error::{ErrorCode, Rejection, Result};
use crate::orchestrator::{trials_to_csv, Budget, BudgetIncrement, CommandKind, ControlCommand, DEFAULT_METRIC};
use crate::service::{RunRequest, RunSnapshot, Store};
use crate::space::SpaceDelta;
use crate::summary::Overview;

#[derive(Debug, Parser)]
#[command(name = "autosteer", version, about = "Steerable AutoML search")]
pub struct Cli {
    /// Base URL of a running server; without it commands run in-process.
    #[arg(long, global = true, env = "AUTOSTEER_SERVER")]
    pub server: Option<String>,
    /// Storage root for in-process mode and for `serve`.
    #[arg(long, global = true, env = "AUTOSTEER_DATA_DIR", default_value = "autosteer-data")]
    pub data_dir: PathBuf,
    /// Print machine-readable JSON.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upload and list datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Create, control, monitor and export runs.
    #[command(subcommand)]
    Run(RunCmd),
    /// Multi-run experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
    /// Start the HTTP API server.
    Serve {
        #[arg(long, env = "AUTOSTEER_LISTEN", default_value = "127.0.0.1:8080")]
        listen: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum DatasetCmd {
    Add {
        csv: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
    Ls,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub dataset: String,
    #[arg(long, default_value_t = 100)]
    pub budget_trials: u64,
    /// Optional wall-clock limit in seconds, summed over trial evaluations.
    #[arg(long)]
    pub budget_secs: Option<f64>,
    /// Keep only these algorithms enabled (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Vec<String>,
    #[arg(long, default_value = DEFAULT_METRIC)]
    pub metric: String,
}

impl RunArgs {
    fn request(&self, seed: u64) -> RunRequest {
        RunRequest {
            dataset_id: self.dataset.clone(),
            algorithms: (!self.algorithms.is_empty()).then(|| self.algorithms.clone()),
            budget: Some(Budget {
                max_wall_clock_secs: self.budget_secs,
                ..Budget::trials(self.budget_trials)
            }),
            seed,
            metric: Some(self.metric.clone()),
            start: true,
            ..RunRequest::default()
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExportFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum RunCmd {
    /// Create a run and start it.
    Start {
        #[command(flatten)]
        args: RunArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Block until the run stops (always the case in-process).
        #[arg(long)]
        wait: bool,
    },
    Ls,
    /// Print a refreshing overview until the run stops.
    Watch {
        id: String,
        #[arg(long, default_value_t = 1.0)]
        interval: f64,
    },
    Pause {
        id: String,
    },
    Resume {
        id: String,
        /// Add this many trials to the budget before resuming.
        #[arg(long)]
        extend_trials: Option<u64>,
        #[arg(long)]
        wait: bool,
    },
    Stop {
        id: String,
    },
    /// Apply search-space deltas, each a JSON object or array of objects.
    Reconfigure {
        id: String,
        #[arg(long, required = true)]
        delta: Vec<String>,
    },
    Export {
        id: String,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: ExportFormat,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExperimentCmd {
    /// Run N independent searches with seeds S..S+N-1 and tabulate their best scores.
    Repeat {
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        args: RunArgs,
        #[arg(long, default_value_t = 0)]
        seed_base: u64,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.80,0.85,0.90,0.95")]
        thresholds: Vec<f64>,
    },
}

/// Parses and runs the command line, returning the process exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime");
    match runtime.block_on(execute(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.code.as_str(), e.message);
            ExitCode::from(1)
        }
    }
}

fn client(cli: &Cli) -> Result<ApiClient> {
    match &cli.server {
        Some(url) => Ok(ApiClient::remote(url)),
        None => Ok(ApiClient::local(Arc::new(Store::open(&cli.data_dir)?))),
    }
}

/// Writes JSON or text to stdout. A closed stdout (e.g. piped into `head`)
/// surfaces as an error instead of a panic.
fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) -> Result<()> {
    let out = if json {
        let mut line = serde_json::to_string(value).expect("serializable");
        line.push('\n');
        line
    } else {
        text()
    };
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(out.as_bytes())?;
    stdout.flush()?;
    Ok(())
}

pub async fn execute(cli: Cli) -> Result<()> {
    if let Command::Serve { listen } = &cli.command {
        return serve(listen, &cli.data_dir).await;
    }
    let api = Arc::new(client(&cli)?);
    let result = tokio::select! {
        r = dispatch(&cli, &api) => r,
        _ = tokio::signal::ctrl_c() => Err(Rejection::new(ErrorCode::Io, "interrupted; local runs paused")),
    };
    let closer = api.clone();
    tokio::task::spawn_blocking(move || closer.close()).await.map_err(|e| Rejection::new(ErrorCode::Io, e.to_string()))?;
    result
}

async fn serve(listen: &str, data_dir: &std::path::Path) -> Result<()> {
    let store = Arc::new(Store::open(data_dir)?);
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .map_err(|e| Rejection::new(ErrorCode::Io, format!("cannot listen on {listen}: {e}")))?;
    let addr = listener.local_addr()?;
    let _ = writeln!(std::io::stderr(), "listening on http://{addr} (data in {})", data_dir.display());
    crate::api::serve(store, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    let _ = writeln!(std::io::stderr(), "stopped; running runs were paused");
    Ok(())
}

async fn dispatch(cli: &Cli, api: &Arc<ApiClient>) -> Result<()> {
    let json = cli.json;
    match &cli.command {
        Command::Serve { .. } => unreachable!("handled before"),
        Command::Dataset(DatasetCmd::Add { csv, name }) => {
            let bytes = std::fs::read(csv)
                .map_err(|e| Rejection::new(ErrorCode::Io, format!("{}: {e}", csv.display())))?;
            let name = name.clone().unwrap_or_else(|| {
                csv.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string()
            });
            let d = api.add_dataset(bytes, &name).await?;
            emit(json, &d, || format!("{}  n={}  d={}  classes={}\n", d.id, d.n, d.d, d.classes.join(",")))?;
        }
        Command::Dataset(DatasetCmd::Ls) => {
            let list = api.datasets().await?;
            emit(json, &list, || {
                let mut out = format!("{:<16} {:<20} {:>7} {:>4}  classes\n", "id", "name", "n", "d");
                for d in &list {
                    let _ = writeln!(out, "{:<16} {:<20} {:>7} {:>4}  {}", d.id, d.name, d.n, d.d, d.classes.join(","));
                }
                out
            })?;
        }
        Command::Run(cmd) => run_command(cmd, api, json).await?,
        Command::Experiment(ExperimentCmd::Repeat { n, args, seed_base, parallel, thresholds }) => {
            let report = repeat(api, args, *n, *seed_base, (*parallel).max(1), thresholds).await?;
            emit(json, &report, || report.render())?;
        }
    }
    Ok(())
}

async fn run_command(cmd: &RunCmd, api: &Arc<ApiClient>, json: bool) -> Result<()> {
    let poll = Duration::from_millis(if api.is_local() { 20 } else { 500 });
    match cmd {
        RunCmd::Start { args, seed, wait } => {
            let snap = api.create_run(&args.request(*seed)).await?;
            if *wait || api.is_local() {
                let done = api.wait_for(&snap.run.id, poll).await?;
                let overview = api.overview(&done.run.id, 5).await?;
                emit(json, &done, || render_overview(&done, &overview))?;
            } else {
                emit(json, &snap, || format!("{}\n", snap.run.id))?;
            }
        }
        RunCmd::Ls => {
            let runs = api.runs().await?;
            emit(json, &runs, || {
                let mut out = format!("{:<10} {:<16} {:<9} {:>7}\n", "id", "dataset", "status", "trials");
                for r in &runs {
                    let _ = writeln!(out, "{:<10} {:<16} {:<9} {:>7}", r.run.id, r.run.dataset_id, r.reported_status, r.n_trials);
                }
                out
            })?;
        }
        RunCmd::Watch { id, interval } => {
            let every = Duration::from_secs_f64(interval.max(0.05));
            loop {
                let snap = api.run(id).await?;
                let overview = api.overview(id, 5).await?;
                emit(json, &overview, || render_overview(&snap, &overview))?;
                if !matches!(snap.reported_status.as_str(), "running" | "pausing") {
                    break;
                }
                tokio::time::sleep(every).await;
            }
        }
        RunCmd::Pause { id } => control(api, id, ControlCommand::new(CommandKind::Pause), json).await?,
        RunCmd::Stop { id } => control(api, id, ControlCommand::new(CommandKind::Stop), json).await?,
        RunCmd::Resume { id, extend_trials, wait } => {
            let mut cmd = ControlCommand::new(CommandKind::Resume);
            if let Some(extra) = extend_trials {
                cmd = cmd.with_budget(BudgetIncrement { max_trials: Some(*extra), max_wall_clock_secs: None });
            }
            control(api, id, cmd, json).await?;
            if *wait || api.is_local() {
                let done = api.wait_for(id, poll).await?;
                let overview = api.overview(id, 5).await?;
                if !json {
                    emit(false, &(), || render_overview(&done, &overview))?;
                }
            }
        }
        RunCmd::Reconfigure { id, delta } => {
            let deltas = parse_deltas(delta)?;
            control(api, id, ControlCommand::reconfigure(deltas), json).await?;
        }
        RunCmd::Export { id, format, output } => {
            let text = match format {
                ExportFormat::Jsonl => api.log(id).await?,
                ExportFormat::Csv => trials_to_csv(&api.trials(id, 0).await?.trials)?,
            };
            match output {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

async fn control(api: &ApiClient, id: &str, cmd: ControlCommand, json: bool) -> Result<()> {
    let reply = api.command(id, &cmd).await?;
    emit(json, &reply, || {
        let queued = if reply.queued { " (applies after the in-flight trial)" } else { "" };
        format!("{} {}{queued}\n", reply.run.run.id, reply.status)
    })?;
    Ok(())
}

/// Each argument is one delta object or an array of them.
pub fn parse_deltas(args: &[String]) -> Result<Vec<SpaceDelta>> {
    let mut out = Vec::new();
    for raw in args {
        let value: serde_json::Value = serde_json::from_str(raw)
            .map_err(|e| Rejection::new(ErrorCode::InvalidDelta, format!("delta is not JSON: {e}")))?;
        let parsed = match value {
            serde_json::Value::Array(_) => serde_json::from_value::<Vec<SpaceDelta>>(value),
            other => serde_json::from_value::<SpaceDelta>(other).map(|d| vec![d]),
        };
        out.extend(parsed.map_err(|e| Rejection::new(ErrorCode::InvalidDelta, e.to_string()))?);
    }
    Ok(out)
}

const SPARK: [char; 8] = ['▁', '▂', '▃', '▄', '▅', '▆', '▇', '█'];

pub fn sparkline(bins: &[u64]) -> String {
    let max = bins.iter().copied().max().unwrap_or(0);
    bins.iter()
        .map(|&b| {
            if b == 0 {
                ' '
            } else {
                SPARK[(b * 7).div_ceil(max) as usize]
            }
        })
        .collect()
}

fn fmt_score(s: Option<f64>) -> String {
    s.map_or_else(|| "-".into(), |s| format!("{s:.4}"))
}

/// Plain-text overview used by `run watch` and after waiting runs.
pub fn render_overview(snap: &RunSnapshot, o: &Overview) -> String {
    let budget = snap
        .run
        .budget
        .max_trials
        .map_or_else(|| snap.n_trials.to_string(), |m| format!("{}/{m}", snap.n_trials));
    let mut out = format!(
        "{}  status={}  trials={budget}  best={}  errors={}\n",
        snap.run.id,
        snap.reported_status,
        fmt_score(o.best_score),
        o.n_errors
    );
    let _ = writeln!(
        out,
        "coverage  algorithms {:.1}%  hyperpartitions {:.1}%",
        o.algorithm_coverage * 100.0,
        o.hyperpartition_coverage * 100.0
    );
    let _ = writeln!(out, "scores    0 |{}| 1", sparkline(&o.histogram));
    for m in &o.top_models {
        let _ = writeln!(out, "  {:>2}. #{:<5} {:<44} {:.4}", m.rank, m.trial_id, m.hyperpartition_id, m.score);
    }
    for n in &snap.notices {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatRow {
    pub run_id: String,
    pub seed: u64,
    pub status: String,
    pub best_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdCount {
    pub threshold: f64,
    /// Runs whose best score is strictly above the threshold.
    pub runs_over: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatReport {
    pub runs: Vec<RepeatRow>,
    pub thresholds: Vec<ThresholdCount>,
    pub min: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
}

impl RepeatReport {
    pub fn new(runs: Vec<RepeatRow>, thresholds: &[f64]) -> Self {
        let mut bests: Vec<f64> = runs.iter().filter_map(|r| r.best_score).collect();
        bests.sort_by(f64::total_cmp);
        let median = match bests.len() {
            0 => None,
            n if n % 2 == 1 => Some(bests[n / 2]),
            n => Some((bests[n / 2 - 1] + bests[n / 2]) / 2.0),
        };
        let thresholds = thresholds
            .iter()
            .map(|&t| ThresholdCount {
                threshold: t,
                runs_over: bests.iter().filter(|&&b| b > t).count(),
                n: runs.len(),
            })
            .collect();
        Self {
            min: bests.first().copied(),
            max: bests.last().copied(),
            median,
            runs,
            thresholds,
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:<10} {:>6} {:<9} {:>8}\n", "run", "seed", "status", "best");
        for r in &self.runs {
            let _ = writeln!(out, "{:<10} {:>6} {:<9} {:>8}", r.run_id, r.seed, r.status, fmt_score(r.best_score));
        }
        let _ = writeln!(
            out,
            "\nbest score  min {}  median {}  max {}\n",
            fmt_score(self.min),
            fmt_score(self.median),
            fmt_score(self.max)
        );
        let _ = writeln!(out, "{:<10} {:>9}", "threshold", "runs over");
        for t in &self.thresholds {
            let _ = writeln!(out, "{:<10.2} {:>4} of {}", t.threshold, t.runs_over, t.n);
        }
        out
    }
}

async fn repeat(
    api: &Arc<ApiClient>,
    args: &RunArgs,
    n: u64,
    seed_base: u64,
    parallel: usize,
    thresholds: &[f64],
) -> Result<RepeatReport> {
    if n == 0 {
        return Err(Rejection::new(ErrorCode::BadRequest, "--n must be at least 1"));
    }
    let poll = Duration::from_millis(if api.is_local() { 20 } else { 500 });
    let sem = Arc::new(tokio::sync::Semaphore::new(parallel));
    let mut tasks = tokio::task::JoinSet::new();
    for i in 0..n {
        let seed = seed_base + i;
        let req = args.request(seed);
        let api = api.clone();
        let permit = sem.clone().acquire_owned().await.expect("semaphore open");
        // create runs in seed order so run ids line up with seeds
        let created = api.create_run(&req).await?;
        tasks.spawn(async move {
            let _permit = permit;
            let done = api.wait_for(&created.run.id, poll).await?;
            let best = api.overview(&done.run.id, 1).await?.best_score;
            Ok::<_, Rejection>(RepeatRow { run_id: done.run.id, seed, status: done.reported_status, best_score: best })
        });
    }
    let mut rows = Vec::new();
    while let Some(joined) = tasks.join_next().await {
        rows.push(joined.map_err(|e| Rejection::new(ErrorCode::Io, e.to_string()))??);
    }
    rows.sort_by_key(|r| r.seed);
    Ok(RepeatReport::new(rows, thresholds))
}
