//! Command-line front end. Every command writes its artifacts and a run
//! manifest into `--out` and prints a JSON summary on stdout.

use crate::coord::{read_boundary_updates, spawn_listener, BoundaryUpdate};
use crate::features::{EnvSeries, Scenario, ScenarioConfig, ScaleClass};
use crate::ingest::{observations_from_shapefiles, parse_manifest, parse_spill_json, write_spill_json, SpillObservation};
use crate::model::{Checkpoint, CoreKind, ModelConfig, ModelError};
use crate::pipeline::{
    compare_solvers, comparison_data, forecast, metric_intervals, paired_tests, spill_sequences, train_checkpoint,
    CompareConfig, PipelineError, PredictionFile, RunManifest, SequenceDataset, REPORT_SCHEMA_VERSION,
};
use crate::sim::{run_simulation, run_simulation_with_feed, PredictorSpec, SimConfig, SimError};
use crate::train::{TrainConfig, TrainError};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde_json::{json, Map, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Input(_) => "input",
            CliError::Numerical(_) => "numerical",
        }
    }

    /// One-line JSON written to stderr.
    pub fn to_json(&self) -> String {
        json!({"error": self.kind(), "message": self.to_string(), "exit_code": self.exit_code()}).to_string()
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        PipelineError::from(e).into()
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(m) => CliError::Input(m),
            SimError::Prediction(m) => CliError::Numerical(m),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Rk4,
    Explicit,
    Euler,
    Lstm,
}

impl From<Solver> for CoreKind {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Rk4 => CoreKind::Rk4,
            Solver::Explicit => CoreKind::FusedExplicit,
            Solver::Euler => CoreKind::Euler,
            Solver::Lstm => CoreKind::Lstm,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Short,
    Medium,
}

#[derive(Debug, Parser)]
#[command(name = "spillnet", version, about = "Spill boundary forecasting and containment simulation")]
pub struct Cli {
    /// JSON config for the command; flags take precedence over it.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub solver: Option<Solver>,
    /// Output directory, created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic ground truth: spill.json and env.json.
    Scenario {
        #[arg(long)]
        kind: Option<u32>,
        #[arg(long)]
        duration_h: Option<u32>,
        #[arg(long)]
        step_h: Option<u32>,
    },
    /// Shapefiles plus a date manifest, or a spill JSON, to canonical spill.json.
    Ingest {
        #[arg(long, conflicts_with_all = ["shapefiles", "manifest"])]
        json: Option<PathBuf>,
        #[arg(long, num_args = 1.., requires = "manifest")]
        shapefiles: Vec<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "spill")]
        spill_id: String,
    },
    /// Spill JSON files (and optional forcing) to dataset.json.
    Features {
        #[arg(long, required = true)]
        spill: Vec<PathBuf>,
        /// One forcing file per spill, in the same order; calm forcing if absent.
        #[arg(long)]
        env: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "short")]
        scale: Scale,
    },
    /// Dataset to checkpoint.json and history.csv.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        /// Reduced network width, for smoke runs.
        #[arg(long)]
        miniature: bool,
    },
    /// Forecasts for every complete window of a dataset.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Scores predictions against observed boundaries.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Second prediction file for paired tests.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Trains all four cores on one dataset and tabulates them.
    CompareSolvers {
        /// Use these spills instead of a synthetic scenario; the last
        /// `test_spills` are held out.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        kind: Option<u32>,
        #[arg(long)]
        test_spills: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
        /// Early-stopping patience shared by every core.
        #[arg(long)]
        patience: Option<usize>,
        /// Consecutive seeds starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Closed-loop containment run.
    Simulate {
        #[arg(long)]
        duration_h: Option<f64>,
        #[arg(long)]
        fleet_size: Option<usize>,
        #[arg(long)]
        p_loss: Option<f64>,
        /// Predict boundaries with this checkpoint instead of the oracle.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Read newline-delimited boundary updates from one TCP client first.
        #[arg(long, value_name = "PORT", conflicts_with = "feed")]
        tcp_listen: Option<u16>,
        /// Read boundary updates from a file first.
        #[arg(long, value_name = "PATH")]
        feed: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Scenario { .. } => "scenario",
            Command::Ingest { .. } => "ingest",
            Command::Features { .. } => "features",
            Command::Train { .. } => "train",
            Command::Predict { .. } => "predict",
            Command::Evaluate { .. } => "evaluate",
            Command::CompareSolvers { .. } => "compare-solvers",
            Command::Simulate { .. } => "simulate",
        }
    }
}

struct Outcome {
    config: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    summary: Value,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPILLNET_LOG", "error")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(std::io::stdout(), "{e}");
            return 0;
        }
        Err(e) => {
            let _ = e.print();
            let err = CliError::Usage(e.kind().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            // a closed pipe downstream is not a failure of the command
            let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            0
        }
        Err(e) => {
            log::debug!("{e:?}");
            let _ = writeln!(std::io::stderr(), "{}", e.to_json());
            e.exit_code()
        }
    }
}

/// Runs a parsed command and writes its manifest.
pub fn execute(cli: &Cli) -> Result<Value> {
    let started = Instant::now();
    let mut manifest = RunManifest::new(cli.command.name(), cli.seed.unwrap_or(0), Value::Null);
    std::fs::create_dir_all(&cli.out).map_err(|e| io_err(&cli.out, e))?;
    let outcome = match &cli.command {
        Command::Scenario { kind, duration_h, step_h } => scenario(cli, *kind, *duration_h, *step_h)?,
        Command::Ingest {
            json,
            shapefiles,
            manifest,
            spill_id,
        } => ingest(cli, json.as_deref(), shapefiles, manifest.as_deref(), spill_id)?,
        Command::Features { spill, env, scale } => features(cli, spill, env, *scale)?,
        Command::Train {
            dataset,
            max_epochs,
            train_fraction,
            miniature,
        } => train(cli, dataset, *max_epochs, *train_fraction, *miniature)?,
        Command::Predict { checkpoint, dataset } => predict(cli, checkpoint, dataset)?,
        Command::Evaluate {
            predictions,
            truth,
            baseline,
        } => evaluate(cli, predictions, truth, baseline.as_deref())?,
        Command::CompareSolvers {
            dataset,
            kind,
            test_spills,
            max_epochs,
            patience,
            seeds,
        } => compare(cli, dataset.as_deref(), *kind, *test_spills, (*max_epochs, *patience), *seeds)?,
        Command::Simulate {
            duration_h,
            fleet_size,
            p_loss,
            checkpoint,
            tcp_listen,
            feed,
        } => simulate(cli, *duration_h, *fleet_size, *p_loss, checkpoint.as_deref(), *tcp_listen, feed.as_deref())?,
    };
    manifest.config = outcome.config;
    manifest.inputs = outcome.inputs;
    manifest.outputs = outcome.outputs.clone();
    manifest.wall_clock_s = started.elapsed().as_secs_f64();
    let path = manifest.write(&cli.out).map_err(|e| io_err(&cli.out, e))?;
    let mut summary = outcome.summary;
    summary["outputs"] = json!(outcome.outputs);
    summary["manifest"] = json!(path);
    Ok(summary)
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(dir: &Path, name: &str, text: &str, outputs: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    outputs.push(path);
    Ok(())
}

/// Config file contents with `flags` laid over them.
fn layered(cli: &Cli, base: Value, flags: &[(&str, Option<Value>)]) -> Result<Value> {
    let mut merged = match base {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    if let Some(path) = &cli.config {
        let file: Value = serde_json::from_str(&read(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let Value::Object(file) = file else {
            return Err(CliError::Input(format!("{}: expected a JSON object", path.display())));
        };
        merged.extend(file);
    }
    for (k, v) in flags {
        if let Some(v) = v {
            merged.insert(k.to_string(), v.clone());
        }
    }
    Ok(Value::Object(merged))
}

fn parse_config<T: DeserializeOwned>(value: &Value) -> Result<T> {
    serde_json::from_value(value.clone()).map_err(|e| CliError::Input(format!("config: {e}")))
}

fn spill_id_of(obs: &[SpillObservation]) -> String {
    obs.first().map(|o| o.spill_id.clone()).unwrap_or_default()
}

fn scenario(cli: &Cli, kind: Option<u32>, duration_h: Option<u32>, step_h: Option<u32>) -> Result<Outcome> {
    let config = layered(
        cli,
        json!({"kind": 1, "seed": 0, "duration_h": 72, "step_h": 1}),
        &[
            ("kind", kind.map(Value::from)),
            ("seed", cli.seed.map(Value::from)),
            ("duration_h", duration_h.map(Value::from)),
            ("step_h", step_h.map(Value::from)),
        ],
    )?;
    let sc: ScenarioConfig = parse_config(&config)?;
    let scenario = Scenario::from_config(&sc).map_err(|e| CliError::Input(e.to_string()))?;
    let spill_id = format!("scenario-{}-{}", sc.kind, sc.seed);
    let (obs, env): (Vec<_>, Vec<_>) = scenario
        .generate(sc.duration_h, sc.step_h)
        .map_err(|e| CliError::Input(e.to_string()))?
        .into_iter()
        .map(|(o, e)| {
            (
                SpillObservation {
                    spill_id: spill_id.clone(),
                    ..o
                },
                e,
            )
        })
        .unzip();
    let env = EnvSeries::new(env).map_err(|e| CliError::Input(e.to_string()))?;
    let mut outputs = Vec::new();
    write(&cli.out, "spill.json", &write_spill_json(&spill_id, &obs), &mut outputs)?;
    write(&cli.out, "env.json", &env.to_json(), &mut outputs)?;
    Ok(Outcome {
        config,
        inputs: Vec::new(),
        outputs,
        summary: json!({"spill_id": spill_id, "observations": obs.len()}),
    })
}

fn ingest(cli: &Cli, json_path: Option<&Path>, shapefiles: &[PathBuf], manifest: Option<&Path>, spill_id: &str) -> Result<Outcome> {
    let input_err = |e: crate::ingest::IngestError| CliError::Input(e.to_string());
    let (obs, inputs) = match (json_path, manifest) {
        (Some(p), _) => (parse_spill_json(&read(p)?).map_err(input_err)?, vec![p.to_path_buf()]),
        (None, Some(m)) => {
            let dates = parse_manifest(&read(m)?).map_err(input_err)?;
            let files = shapefiles
                .iter()
                .map(|p| {
                    let bytes = std::fs::read(p).map_err(|e| io_err(p, e))?;
                    let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                    Ok((name, bytes))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut inputs = shapefiles.to_vec();
            inputs.push(m.to_path_buf());
            (observations_from_shapefiles(spill_id, &files, &dates).map_err(input_err)?, inputs)
        }
        (None, None) => return Err(CliError::Usage("ingest needs --json or --shapefiles with --manifest".into())),
    };
    let id = spill_id_of(&obs);
    let mut outputs = Vec::new();
    write(&cli.out, "spill.json", &write_spill_json(&id, &obs), &mut outputs)?;
    Ok(Outcome {
        config: json!({"spill_id": id}),
        inputs,
        outputs,
        summary: json!({"spill_id": id, "observations": obs.len()}),
    })
}

fn features(cli: &Cli, spills: &[PathBuf], envs: &[PathBuf], scale: Scale) -> Result<Outcome> {
    if !envs.is_empty() && envs.len() != spills.len() {
        return Err(CliError::Usage(format!("{} --env files for {} --spill files", envs.len(), spills.len())));
    }
    let scale = match scale {
        Scale::Short => ScaleClass::Short,
        Scale::Medium => ScaleClass::Medium,
    };
    let mut dataset = SequenceDataset {
        scale_class: scale,
        spills: Vec::new(),
    };
    for (i, path) in spills.iter().enumerate() {
        let obs = parse_spill_json(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let env = match envs.get(i) {
            Some(p) => Some(EnvSeries::from_json(&read(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?),
            None => {
                log::warn!("{}: no forcing given, using calm conditions", path.display());
                None
            }
        };
        dataset.spills.push(spill_sequences(obs, env.as_ref(), scale)?);
    }
    let mut outputs = Vec::new();
    write(&cli.out, "dataset.json", &dataset.to_json(), &mut outputs)?;
    Ok(Outcome {
        config: json!({"scale_class": scale}),
        inputs: spills.iter().chain(envs).cloned().collect(),
        outputs,
        summary: json!({
            "spills": dataset.spills.len(),
            "windows": dataset.sequences().len(),
            "complete_windows": dataset.complete_windows(),
        }),
    })
}

fn load_dataset(path: &Path) -> Result<SequenceDataset> {
    SequenceDataset::from_json(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn train(cli: &Cli, dataset_path: &Path, max_epochs: Option<usize>, train_fraction: f64, miniature: bool) -> Result<Outcome> {
    let config = layered(
        cli,
        json!({}),
        &[
            ("core", cli.solver.map(|s| json!(CoreKind::from(s)))),
            ("seed", cli.seed.map(Value::from)),
            ("max_epochs", max_epochs.map(Value::from)),
        ],
    )?;
    let tc = TrainConfig::from_json(&config.to_string())?;
    let model = if miniature {
        ModelConfig::miniature(tc.core)
    } else {
        ModelConfig::with_core(tc.core)
    };
    let dataset = load_dataset(dataset_path)?;
    let (checkpoint, outcome) = train_checkpoint(&dataset, &model, &tc, train_fraction)?;
    let mut outputs = Vec::new();
    write(&cli.out, "checkpoint.json", &checkpoint.to_json(), &mut outputs)?;
    write(&cli.out, "history.csv", &outcome.history_csv(), &mut outputs)?;
    let best = outcome.best();
    Ok(Outcome {
        config: json!({"train": tc, "model": model, "train_fraction": train_fraction}),
        inputs: vec![dataset_path.to_path_buf()],
        outputs,
        summary: json!({
            "core": tc.core,
            "epochs": outcome.history.len() - 1,
            "best_epoch": outcome.best_epoch,
            "best_val_loss": best.val_loss,
            "best_val_mse": best.val_mse,
            "epoch0_val_mse": outcome.history[0].val_mse,
        }),
    })
}

fn file_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn predict(cli: &Cli, checkpoint_path: &Path, dataset_path: &Path) -> Result<Outcome> {
    let checkpoint = load_checkpoint(checkpoint_path)?;
    let dataset = load_dataset(dataset_path)?;
    let mut outputs = Vec::new();
    let mut counts = Map::new();
    for spill in &dataset.spills {
        let file = PredictionFile {
            spill_id: spill.spill_id.clone(),
            core: checkpoint.config.core,
            feature_normalizer: checkpoint.feature_normalizer.clone(),
            points: forecast(&checkpoint, spill)?,
        };
        let stem = format!("predictions_{}", file_safe(&spill.spill_id));
        write(&cli.out, &format!("{stem}.json"), &file.to_json(), &mut outputs)?;
        let geojson = file.to_geojson().map_err(CliError::from)?;
        write(&cli.out, &format!("{stem}.geojson"), &geojson, &mut outputs)?;
        counts.insert(spill.spill_id.clone(), json!(file.points.len()));
    }
    Ok(Outcome {
        config: json!({"core": checkpoint.config.core}),
        inputs: vec![checkpoint_path.to_path_buf(), dataset_path.to_path_buf()],
        outputs,
        summary: json!({"points": counts}),
    })
}

fn evaluate(cli: &Cli, predictions: &Path, truth_path: &Path, baseline: Option<&Path>) -> Result<Outcome> {
    let load = |p: &Path| -> Result<PredictionFile> {
        PredictionFile::from_json(&read(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
    };
    let seed = cli.seed.unwrap_or(0);
    let file = load(predictions)?;
    let truth = parse_spill_json(&read(truth_path)?).map_err(|e| CliError::Input(format!("{}: {e}", truth_path.display())))?;
    let run = file.evaluate(&truth)?;
    let intervals = metric_intervals(&run.steps, seed)?;
    let mut inputs = vec![predictions.to_path_buf(), truth_path.to_path_buf()];
    let tests = match baseline {
        Some(b) => {
            inputs.push(b.to_path_buf());
            let base = load(b)?;
            let base_run = base.evaluate(&truth)?;
            paired_tests(&run.steps, &base_run.steps, (file.core.label(), base.core.label()), seed)?
        }
        None => Vec::new(),
    };
    let report = json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "core": file.core,
        "metrics": run.report,
        "spatial_accuracy": run.report.spatial_accuracy(),
        "intervals": intervals,
        "tests": tests,
        "steps": run.steps.len(),
    });
    let mut outputs = Vec::new();
    write(&cli.out, "metrics.csv", &run.to_csv(), &mut outputs)?;
    write(&cli.out, "metrics.json", &serde_json::to_string_pretty(&report).expect("report serializes"), &mut outputs)?;
    write(&cli.out, "evaluation.geojson", &run.to_geojson(), &mut outputs)?;
    Ok(Outcome {
        config: json!({"seed": seed}),
        inputs,
        outputs,
        summary: json!({
            "area_mae": run.report.area_mae,
            "centroid_disp_km": run.report.centroid_disp_km,
            "spatial_accuracy": run.report.spatial_accuracy(),
            "temporal_consistency": run.report.temporal_consistency,
        }),
    })
}

fn compare(
    cli: &Cli,
    dataset_path: Option<&Path>,
    kind: Option<u32>,
    test_spills: Option<usize>,
    (max_epochs, patience): (Option<usize>, Option<usize>),
    seeds: u64,
) -> Result<Outcome> {
    let config = layered(
        cli,
        serde_json::to_value(CompareConfig::default()).expect("config serializes"),
        &[
            ("kind", kind.map(Value::from)),
            ("test_spills", test_spills.map(Value::from)),
            ("max_epochs", max_epochs.map(Value::from)),
            ("patience", patience.map(Value::from)),
        ],
    )?;
    let cc: CompareConfig = parse_config(&config)?;
    if cc.test_spills == 0 || seeds == 0 {
        return Err(CliError::Usage("test_spills and --seeds must be positive".into()));
    }
    let given = dataset_path.map(load_dataset).transpose()?;
    let first = cli.seed.unwrap_or(0);
    let mut outputs = Vec::new();
    let mut summary = Vec::new();
    for seed in first..first + seeds {
        let (train, test) = match &given {
            Some(d) => {
                if d.spills.len() <= cc.test_spills {
                    return Err(CliError::Input(format!(
                        "dataset has {} spills; {} are held out for testing",
                        d.spills.len(),
                        cc.test_spills
                    )));
                }
                let cut = d.spills.len() - cc.test_spills;
                let mut train = SequenceDataset {
                    scale_class: d.scale_class,
                    spills: d.spills[..cut].to_vec(),
                };
                train.limit_windows(cc.windows);
                (
                    train,
                    SequenceDataset {
                        scale_class: d.scale_class,
                        spills: d.spills[cut..].to_vec(),
                    },
                )
            }
            None => comparison_data(&cc, seed)?,
        };
        let report = compare_solvers(&train, &test, &cc, seed)?;
        let suffix = if seeds > 1 { format!("_seed{seed}") } else { String::new() };
        write(&cli.out, &format!("comparison{suffix}.json"), &report.to_json(), &mut outputs)?;
        write(&cli.out, &format!("area_table{suffix}.csv"), &report.area_table_csv(), &mut outputs)?;
        write(&cli.out, &format!("metric_table{suffix}.csv"), &report.metric_table_csv(), &mut outputs)?;
        let rows: Vec<Value> = report
            .rows
            .iter()
            .map(|r| {
                json!({
                    "model": r.label,
                    "area_mae": r.metrics.area_mae,
                    "spatial_accuracy": r.metrics.spatial_accuracy(),
                    "temporal_consistency": r.metrics.temporal_consistency,
                    "best_val_mse": r.best_val_mse,
                })
            })
            .collect();
        summary.push(json!({"seed": seed, "rows": rows}));
    }
    Ok(Outcome {
        config,
        inputs: dataset_path.map(Path::to_path_buf).into_iter().collect(),
        outputs,
        summary: json!({"runs": summary}),
    })
}

fn simulate(
    cli: &Cli,
    duration_h: Option<f64>,
    fleet_size: Option<usize>,
    p_loss: Option<f64>,
    checkpoint: Option<&Path>,
    tcp_listen: Option<u16>,
    feed_path: Option<&Path>,
) -> Result<Outcome> {
    let config = layered(
        cli,
        serde_json::to_value(SimConfig::default()).expect("config serializes"),
        &[
            ("seed", cli.seed.map(Value::from)),
            ("duration_h", duration_h.map(Value::from)),
            ("fleet_size", fleet_size.map(Value::from)),
            ("p_loss", p_loss.map(Value::from)),
            (
                "predictor",
                checkpoint.map(|p| serde_json::to_value(PredictorSpec::Checkpoint { path: p.to_path_buf() }).expect("spec serializes")),
            ),
        ],
    )?;
    let sc: SimConfig = parse_config(&config)?;
    let mut inputs: Vec<PathBuf> = checkpoint.map(Path::to_path_buf).into_iter().collect();
    let feed: Option<Vec<BoundaryUpdate>> = match (tcp_listen, feed_path) {
        (Some(port), _) => {
            let (addr, rx, handle) =
                spawn_listener(("127.0.0.1", port), 1).map_err(|e| CliError::Input(format!("listen on {port}: {e}")))?;
            log::info!("waiting for boundary updates on {addr}");
            handle.join().map_err(|_| CliError::Input("boundary listener failed".into()))?;
            Some(rx.try_iter().collect())
        }
        (None, Some(p)) => {
            inputs.push(p.to_path_buf());
            let file = std::fs::File::open(p).map_err(|e| io_err(p, e))?;
            Some(
                read_boundary_updates(std::io::BufReader::new(file))
                    .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
            )
        }
        (None, None) => None,
    };
    let out = match feed {
        Some(updates) => run_simulation_with_feed(&sc, updates)?,
        None => run_simulation(&sc)?,
    };
    let mut outputs = Vec::new();
    write(&cli.out, "events.jsonl", &out.log.to_jsonl(), &mut outputs)?;
    write(
        &cli.out,
        "sim_metrics.json",
        &serde_json::to_string_pretty(&out.metrics).expect("metrics serialize"),
        &mut outputs,
    )?;
    write(&cli.out, "tracks.geojson", &out.tracks_geojson(6), &mut outputs)?;
    let m = &out.metrics;
    Ok(Outcome {
        config,
        inputs,
        outputs,
        summary: json!({
            "ticks": m.ticks,
            "time_to_containment_ticks": m.time_to_containment_ticks,
            "max_coverage": m.max_coverage,
            "max_swept": m.max_swept,
            "safety_violations": m.safety_violations,
            "messages_sent": m.messages_sent,
            "messages_dropped": m.messages_dropped,
            "critical": m.critical,
        }),
    })
}
