//! Command-line front end: `generate`, `train`, `evaluate`, `verify`.
//!
//! Every subcommand accepts `--config FILE` (TOML); flags override file
//! values. Exit codes: 0 success, 1 usage error, 2 runtime failure,
//! 3 verification failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::benchmarks::{
    gen_ad_alloc, gen_bipartite, load_cora, read_dataset, write_dataset, AdAllocConfig, BipartiteConfig, CoraConfig,
    Manifest, PerturbMode,
};
use crate::metrics::{evaluate_model, metrics_csv, InstanceMetrics, MetricsRow};
use crate::predictor::{CostModel, Link, MlpModel, OracleModel, PredictorParams};
use crate::losses::Ablation;
use crate::trainer::{train_modfl, train_twostage, TrainConfig, TrainOutcome};
use crate::{Dataset, Error};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const PER_INSTANCE_FILE: &str = "per_instance.json";

#[derive(Debug, Parser)]
#[command(name = "modfl", version, about = "Multi-objective decision-focused learning over LPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a benchmark dataset directory.
    Generate(GenerateArgs),
    /// Train a cost model on a dataset directory.
    Train(TrainArgs),
    /// Score checkpoints (or the oracle) on a dataset directory.
    Evaluate(EvaluateArgs),
    /// Run the self-check suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Bipartite,
    Ad,
    Cora,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Modfl,
    Twostage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub benchmark: Option<Benchmark>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Nodes per bipartite or Cora instance.
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub perturb_mode: Option<PerturbMode>,
    #[arg(long)]
    pub third_objective: bool,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub denom: Option<usize>,
    #[arg(long)]
    pub cora_content: Option<PathBuf>,
    #[arg(long)]
    pub cora_cites: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Zero a loss term: landscape, decision or pareto_set. Repeatable.
    #[arg(long)]
    pub ablate: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub p_solve: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Checkpoint file or training run directory. Repeatable.
    #[arg(long)]
    pub checkpoint: Vec<PathBuf>,
    /// Row label per checkpoint, in order.
    #[arg(long)]
    pub label: Vec<String>,
    /// Adds a row for the model that predicts the true costs.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitChoice,
    #[arg(long)]
    pub denom: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Usage(m),
            other => CliError::Runtime(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Generate(a) => cmd_generate(&a).map(|_| ()),
        Command::Train(a) => cmd_train(&a).map(|_| ()),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|_| ()),
        Command::Verify(a) => cmd_verify(&a),
    }
}

fn read_config_file(path: Option<&Path>) -> CliResult<Map<String, Value>> {
    let Some(path) = path else { return Ok(Map::new()) };
    let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(Error::io(path, e)))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e.message())))?;
    match serde_json::to_value(table) {
        Ok(Value::Object(m)) => Ok(m),
        _ => Err(CliError::Usage(format!("{}: not a table", path.display()))),
    }
}

/// Deserializes `T` from its defaults overlaid with `values`, rejecting keys
/// `T` does not have.
fn resolve<T: Serialize + DeserializeOwned + Default>(what: &str, values: Map<String, Value>) -> CliResult<T> {
    let Value::Object(mut base) = serde_json::to_value(T::default()).expect("config serializes") else {
        unreachable!("configs are structs")
    };
    for (k, v) in values {
        if !base.contains_key(&k) {
            return Err(CliError::Usage(format!("unknown {what} field `{k}`")));
        }
        base.insert(k, v);
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Usage(format!("{what}: {e}")))
}

fn take<T: DeserializeOwned>(map: &mut Map<String, Value>, key: &str) -> CliResult<Option<T>> {
    match map.remove(key) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v).map(Some).map_err(|e| CliError::Usage(format!("field `{key}`: {e}"))),
    }
}

fn set<V: Serialize>(map: &mut Map<String, Value>, key: &str, v: Option<V>) {
    if let Some(v) = v {
        map.insert(key.into(), serde_json::to_value(v).expect("flag serializes"));
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Runtime(Error::io(path, e)))
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Generates and writes a dataset; returns it with its manifest.
pub fn cmd_generate(a: &GenerateArgs) -> CliResult<(Dataset, Manifest)> {
    let mut file = read_config_file(a.config.as_deref())?;
    let file_benchmark: Option<String> = take(&mut file, "benchmark")?;
    let benchmark = match (a.benchmark, file_benchmark.as_deref()) {
        (Some(b), _) => b,
        (None, Some("bipartite")) => Benchmark::Bipartite,
        (None, Some("ad")) => Benchmark::Ad,
        (None, Some("cora")) => Benchmark::Cora,
        (None, Some(other)) => return Err(CliError::Usage(format!("unknown benchmark `{other}`"))),
        (None, None) => return Err(CliError::Usage("missing --benchmark".into())),
    };
    let file_instances: Option<usize> = take(&mut file, "instances")?;
    let instances = a.instances.or(file_instances);
    if instances == Some(0) {
        return Err(CliError::Usage("field `instances` must be positive".into()));
    }
    let content: Option<PathBuf> = take(&mut file, "cora_content")?;
    let cites: Option<PathBuf> = take(&mut file, "cora_cites")?;
    let mut over = file;
    set(&mut over, "seed", a.seed);
    set(&mut over, "rho", a.rho);
    set(&mut over, "perturb_mode", a.perturb_mode);
    set(&mut over, "denom", a.denom);
    if a.third_objective {
        over.insert("third_objective".into(), Value::Bool(true));
    }
    let (dataset, config, seed) = match benchmark {
        Benchmark::Bipartite => {
            set(&mut over, "instances", instances);
            set(&mut over, "nodes", a.nodes);
            set(&mut over, "feature_dim", a.feature_dim);
            let cfg: BipartiteConfig = resolve("bipartite", over)?;
            (gen_bipartite(&cfg)?, serde_json::to_value(&cfg), cfg.seed)
        }
        Benchmark::Ad => {
            set(&mut over, "feature_dim", a.feature_dim);
            if a.nodes.is_some() {
                return Err(CliError::Usage("--nodes does not apply to the ad benchmark; set nd in the config".into()));
            }
            let cfg: AdAllocConfig = resolve("ad", over)?;
            let count = instances.unwrap_or(27);
            let mut value = serde_json::to_value(&cfg).expect("config serializes");
            value["instances"] = json!(count);
            (gen_ad_alloc(&cfg, count)?, Ok(value), cfg.seed)
        }
        Benchmark::Cora => {
            set(&mut over, "instances", instances);
            set(&mut over, "nodes_per", a.nodes);
            let cfg: CoraConfig = resolve("cora", over)?;
            let content = a.cora_content.clone().or(content);
            let cites = a.cora_cites.clone().or(cites);
            let (Some(content), Some(cites)) = (content, cites) else {
                return Err(CliError::Usage("cora needs --cora-content and --cora-cites".into()));
            };
            let ds = load_cora(&content, &cites, &cfg)?;
            let mut value = serde_json::to_value(&cfg).expect("config serializes");
            value["cora_content"] = json!(content);
            value["cora_cites"] = json!(cites);
            (ds, Ok(value), cfg.seed)
        }
    };
    let config = config.expect("config serializes");
    let name = serde_json::to_value(benchmark).expect("serializes");
    let manifest = Manifest::new(name.as_str().unwrap_or("unknown"), seed, config, &dataset);
    write_dataset(&a.out, &dataset, &manifest)?;
    println!("wrote {} instances to {}", dataset.instances.len(), a.out.display());
    Ok((dataset, manifest))
}

/// Display name of a run.
pub fn run_label(method: Method, ablation: &Ablation) -> String {
    let base = match method {
        Method::Modfl => "MoDFL",
        Method::Twostage => "TwoStage",
    };
    let mut parts = Vec::new();
    if ablation.landscape {
        parts.push("w/o Landscape Loss");
    }
    if ablation.decision {
        parts.push("w/o Decision Loss");
    }
    if ablation.pareto_set {
        parts.push("w/o Pareto Set Loss");
    }
    if parts.is_empty() || method == Method::Twostage {
        base.into()
    } else {
        parts.join("; ")
    }
}

fn load_dataset(dir: &Path) -> CliResult<(Dataset, Manifest)> {
    let (ds, m) = read_dataset(dir)?;
    if ds.instances.is_empty() {
        return Err(CliError::Usage(format!("dataset {} is empty", dir.display())));
    }
    Ok((ds, m))
}

/// Trains and writes checkpoint, log, summary and resolved config.
pub fn cmd_train(a: &TrainArgs) -> CliResult<TrainOutcome> {
    let mut file = read_config_file(a.config.as_deref())?;
    let file_method: Option<Method> = match take::<String>(&mut file, "method")?.as_deref() {
        None => None,
        Some("modfl") => Some(Method::Modfl),
        Some("twostage") => Some(Method::Twostage),
        Some(other) => return Err(CliError::Usage(format!("unknown method `{other}`"))),
    };
    let method = a.method.or(file_method).unwrap_or(Method::Modfl);
    let mut ablate: Vec<String> = take(&mut file, "ablate")?.unwrap_or_default();
    ablate.extend(a.ablate.iter().cloned());
    let mut over = file;
    set(&mut over, "seed", a.seed);
    set(&mut over, "max_epochs", a.epochs);
    set(&mut over, "lr", a.lr);
    set(&mut over, "batch_size", a.batch_size);
    set(&mut over, "gamma", a.gamma);
    set(&mut over, "patience", a.patience);
    set(&mut over, "p_solve", a.p_solve);
    let mut cfg: TrainConfig = resolve("train", over)?;
    for name in &ablate {
        cfg.ablation.set(name)?;
    }
    cfg.validate()?;
    let (dataset, manifest) = load_dataset(&a.data)?;
    let label = run_label(method, &cfg.ablation);
    log::info!("training {label} on {} instances", dataset.instances.len());
    let outcome = match method {
        Method::Modfl => train_modfl(&dataset, &cfg)?,
        Method::Twostage => train_twostage(&dataset, &cfg)?,
    };

    fs::create_dir_all(&a.out).map_err(|e| CliError::Runtime(Error::io(&a.out, e)))?;
    let resolved = json!({
        "version": crate::VERSION,
        "command": "train",
        "method": method,
        "label": label,
        "dataset": a.data,
        "dataset_manifest": manifest,
        "train": cfg,
    });
    write_text(&a.out.join(RESOLVED_CONFIG_FILE), &pretty(&resolved))?;
    outcome.params.save(&a.out.join(CHECKPOINT_FILE))?;
    // wall-clock times go to the summary so the log stays reproducible
    let mut log = String::new();
    for r in &outcome.log {
        let line = json!({
            "epoch": r.epoch,
            "method": label,
            "l": r.train_losses.l,
            "d": r.train_losses.d,
            "ps": r.train_losses.ps,
            "total": r.train_losses.total,
            "val_total": r.val_total,
            "cache_sizes": r.cache_sizes,
        });
        log.push_str(&line.to_string());
        log.push('\n');
    }
    write_text(&a.out.join(TRAIN_LOG_FILE), &log)?;
    let summary = json!({
        "label": label,
        "best_epoch": outcome.best_epoch,
        "epochs": outcome.log.len(),
        "counters": outcome.counters,
        "flagged_instances": outcome.flagged,
        "wall_time_s": outcome.log.iter().map(|r| r.wall_time_s).collect::<Vec<_>>(),
    });
    write_text(&a.out.join(SUMMARY_FILE), &pretty(&summary))?;
    println!(
        "{label}: {} epochs, best epoch {}, {} layer calls, wrote {}",
        outcome.log.len(),
        outcome.best_epoch,
        outcome.counters.dslp_calls,
        a.out.display()
    );
    Ok(outcome)
}

/// Checkpoint path and default label of a file or run directory.
fn locate_checkpoint(path: &Path) -> (PathBuf, String) {
    let (file, dir) = if path.is_dir() {
        (path.join(CHECKPOINT_FILE), Some(path.to_path_buf()))
    } else {
        (path.to_path_buf(), path.parent().map(Path::to_path_buf))
    };
    let from_run = dir
        .map(|d| d.join(RESOLVED_CONFIG_FILE))
        .and_then(|p| fs::read_to_string(p).ok())
        .and_then(|t| serde_json::from_str::<Value>(&t).ok())
        .and_then(|v| v["label"].as_str().map(str::to_owned));
    let fallback = file.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_owned();
    (file, from_run.unwrap_or(fallback))
}

/// Scores every requested model; writes the metrics CSV and per-instance
/// JSON.
pub fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<Vec<MetricsRow>> {
    if a.checkpoint.is_empty() && !a.oracle {
        return Err(CliError::Usage("nothing to evaluate: pass --checkpoint or --oracle".into()));
    }
    if !a.label.is_empty() && a.label.len() != a.checkpoint.len() {
        return Err(CliError::Usage(format!(
            "{} labels for {} checkpoints",
            a.label.len(),
            a.checkpoint.len()
        )));
    }
    let (dataset, _) = load_dataset(&a.data)?;
    let indices: Vec<usize> = match a.split {
        SplitChoice::Train => dataset.split.train.clone(),
        SplitChoice::Validation => dataset.split.validation.clone(),
        SplitChoice::Test => dataset.split.test.clone(),
        SplitChoice::All => (0..dataset.instances.len()).collect(),
    };
    if indices.is_empty() {
        return Err(CliError::Usage("selected split is empty".into()));
    }
    let denom = a.denom.unwrap_or(crate::benchmarks::DEFAULT_DENOM);
    let mut models: Vec<(String, Box<dyn CostModel>)> = Vec::new();
    for (k, path) in a.checkpoint.iter().enumerate() {
        let (file, default_label) = locate_checkpoint(path);
        let params = PredictorParams::load(&file)?;
        let want = (dataset.feature_dim(), dataset.t_objectives());
        let got = (params.arch.input_dim, params.arch.heads);
        if want != got {
            return Err(CliError::Runtime(Error::Domain(format!(
                "checkpoint {} expects {} features and {} objectives, dataset has {} and {}",
                file.display(),
                got.0,
                got.1,
                want.0,
                want.1
            ))));
        }
        let label = a.label.get(k).cloned().unwrap_or(default_label);
        models.push((label, Box::new(MlpModel { params, link: Link::for_kind(dataset.cost_kind) })));
    }
    if a.oracle {
        models.push(("Oracle".into(), Box::new(OracleModel)));
    }
    let mut rows = Vec::new();
    let mut per: Vec<(String, Vec<InstanceMetrics>)> = Vec::new();
    for (label, model) in &models {
        let (row, detail) = evaluate_model(&dataset, &indices, model.as_ref(), denom, label)?;
        println!("{label}: GD {:.6} MPFE {:.6} HAR {:.6} r {:.6}", row.gd, row.mpfe, row.har, row.r);
        rows.push(row);
        per.push((label.clone(), detail));
    }
    fs::create_dir_all(&a.out).map_err(|e| CliError::Runtime(Error::io(&a.out, e)))?;
    write_text(&a.out.join(METRICS_FILE), &metrics_csv(&rows))?;
    let per_json: Vec<Value> = per.iter().map(|(l, d)| json!({ "method": l, "instances": d })).collect();
    write_text(&a.out.join(PER_INSTANCE_FILE), &pretty(&per_json))?;
    Ok(rows)
}

pub fn cmd_verify(a: &VerifyArgs) -> CliResult<()> {
    let report = crate::verify::run_all();
    print!("{}", report.render());
    if let Some(path) = &a.json {
        write_text(path, &pretty(&report))?;
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.suites.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}
