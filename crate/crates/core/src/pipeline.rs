//! File formats and end-to-end workflows behind the command line.

use crate::evaluate::{
    bootstrap_ci, compare_paired, evaluate_run, reconstruct_boundary, summary_stats, EvalError, EvalPoint, EvalRun,
    MetricReport, StatResult, StepRecord, SummaryStats, DEFAULT_RESAMPLES,
};
use crate::features::{
    build_sequences, extract_series, EnvSample, EnvSeries, FeatureError, FeatureSequence, Normalizer, Scenario,
    ScenarioParams, ScaleClass,
};
use crate::ingest::time::{format_iso8601, parse_iso8601};
use crate::ingest::{parse_spill_json, write_spill_json, IngestError, SpillObservation};
use crate::model::{predict_batch, Checkpoint, CoreKind, ModelConfig, ModelError, PredictionSet};
use crate::tensor::Tensor;
use crate::train::{prepare, train_model, TrainConfig, TrainError, TrainOutcome};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

pub const DATASET_SCHEMA_VERSION: &str = "1.0";
pub const PREDICTIONS_SCHEMA_VERSION: &str = "1.0";
pub const REPORT_SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Format(String),
}

impl PipelineError {
    /// NaN or divergence rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            PipelineError::Model(ModelError::Numerical(_))
                | PipelineError::Train(TrainError::Numerical { .. })
                | PipelineError::Train(TrainError::Model(ModelError::Numerical(_)))
        )
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn format_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Format(msg.into())
}

fn check_version(doc: &Value, what: &str) -> Result<()> {
    match doc.get("schema_version").and_then(Value::as_str) {
        Some(v) if v.split('.').next() == Some("1") => Ok(()),
        Some(v) => Err(format_err(format!("{what}: unsupported schema version {v:?}"))),
        None => Err(format_err(format!("{what}: missing schema_version"))),
    }
}

/// Provenance written next to every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: u64,
    pub version: String,
    pub started_utc: String,
    pub wall_clock_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: Value) -> Self {
        Self {
            command: command.into(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            started_utc: chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            wall_clock_s: 0.0,
        }
    }

    /// Writes `<dir>/<command>.manifest.json` and returns its path.
    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(format!("{}.manifest.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(self).expect("manifest serializes"))?;
        Ok(path)
    }
}

/// The windows cut from one spill, with the observations they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct SpillSequences {
    pub spill_id: String,
    pub truth: Vec<SpillObservation>,
    pub sequences: Vec<FeatureSequence>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceDataset {
    pub scale_class: ScaleClass,
    pub spills: Vec<SpillSequences>,
}

impl SequenceDataset {
    pub fn to_json(&self) -> String {
        let spills: Vec<Value> = self
            .spills
            .iter()
            .map(|s| {
                let truth: Value =
                    serde_json::from_str(&write_spill_json(&s.spill_id, &s.truth)).expect("spill json is valid");
                json!({"spill_id": s.spill_id, "truth": truth, "sequences": s.sequences})
            })
            .collect();
        serde_json::to_string(&json!({
            "schema_version": DATASET_SCHEMA_VERSION,
            "scale_class": self.scale_class,
            "spills": spills,
        }))
        .expect("dataset serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| format_err(format!("dataset: {e}")))?;
        check_version(&doc, "dataset")?;
        let scale_class: ScaleClass = serde_json::from_value(doc["scale_class"].clone())
            .map_err(|e| format_err(format!("dataset: scale_class: {e}")))?;
        let spills = doc["spills"]
            .as_array()
            .ok_or_else(|| format_err("dataset: missing spills array"))?
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let spill_id = s["spill_id"]
                    .as_str()
                    .ok_or_else(|| format_err(format!("dataset: spills/{i}: missing spill_id")))?
                    .to_string();
                let truth = parse_spill_json(&s["truth"].to_string())?;
                let sequences = serde_json::from_value(s["sequences"].clone())
                    .map_err(|e| format_err(format!("dataset: spills/{i}/sequences: {e}")))?;
                Ok(SpillSequences {
                    spill_id,
                    truth,
                    sequences,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { scale_class, spills })
    }

    pub fn sequences(&self) -> Vec<FeatureSequence> {
        self.spills.iter().flat_map(|s| s.sequences.iter().cloned()).collect()
    }

    pub fn complete_windows(&self) -> usize {
        self.spills
            .iter()
            .map(|s| s.sequences.iter().filter(|q| q.targets_complete()).count())
            .sum()
    }

    /// Keeps the first `n` windows with complete targets, in spill order, and
    /// drops spills left empty.
    pub fn limit_windows(&mut self, n: usize) {
        let mut left = n;
        for s in &mut self.spills {
            s.sequences.retain(|q| q.targets_complete());
            s.sequences.truncate(left);
            left -= s.sequences.len();
        }
        self.spills.retain(|s| !s.sequences.is_empty());
    }
}

/// Windows for one spill; without `env` the forcing is taken as calm.
pub fn spill_sequences(observations: Vec<SpillObservation>, env: Option<&EnvSeries>, scale: ScaleClass) -> Result<SpillSequences> {
    let spill_id = observations
        .first()
        .map(|o| o.spill_id.clone())
        .ok_or(FeatureError::EmptyInput)?;
    let series = extract_series(&observations, |t| match env {
        Some(e) => e.at(t),
        None => EnvSample {
            valid_time: t,
            ..EnvSample::default()
        },
    })?;
    Ok(SpillSequences {
        spill_id,
        sequences: build_sequences(&series, scale)?,
        truth: observations,
    })
}

/// Hourly ground truth and forcing of one synthetic spill.
pub fn scenario_spill(kind: u32, seed: u64, duration_h: u32) -> Result<(Vec<SpillObservation>, EnvSeries)> {
    let scenario = Scenario::new(kind, seed, &ScenarioParams::default())?;
    let id = format!("scenario-{kind}-{seed}");
    let (obs, env): (Vec<_>, Vec<_>) = scenario
        .generate(duration_h, 1)?
        .into_iter()
        .map(|(o, e)| {
            (
                SpillObservation {
                    spill_id: id.clone(),
                    ..o
                },
                e,
            )
        })
        .unzip();
    Ok((obs, EnvSeries::new(env)?))
}

pub fn scenario_dataset(kind: u32, seeds: &[u64], duration_h: u32) -> Result<SequenceDataset> {
    let spills = seeds
        .iter()
        .map(|&seed| {
            let (obs, env) = scenario_spill(kind, seed, duration_h)?;
            spill_sequences(obs, Some(&env), ScaleClass::Short)
        })
        .collect::<Result<_>>()?;
    Ok(SequenceDataset {
        scale_class: ScaleClass::Short,
        spills,
    })
}

/// Fits the normalizers on the leading `train_fraction` of windows and trains.
pub fn train_checkpoint(
    dataset: &SequenceDataset,
    model: &ModelConfig,
    config: &TrainConfig,
    train_fraction: f64,
) -> Result<(Checkpoint, TrainOutcome)> {
    let data = prepare(&dataset.sequences(), train_fraction)?;
    let outcome = train_model(&data, model, config)?;
    Ok((
        Checkpoint {
            config: model.clone(),
            params: outcome.params.clone(),
            feature_normalizer: data.feature_normalizer,
            aux_normalizer: data.aux_normalizer,
        },
        outcome,
    ))
}

/// Forecasts from every window with complete targets.
pub fn forecast(checkpoint: &Checkpoint, spill: &SpillSequences) -> Result<Vec<EvalPoint>> {
    let usable: Vec<&FeatureSequence> = spill.sequences.iter().filter(|q| q.targets_complete()).collect();
    let windows: Vec<Tensor> = usable
        .iter()
        .map(|q| {
            let rows: Vec<Vec<f64>> =
                q.window.iter().map(|v| checkpoint.feature_normalizer.normalize(v.as_slice())).collect();
            Tensor::from_rows(&rows).map_err(|e| PipelineError::Model(e.into()))
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(windows.len());
    for (chunk, seqs) in windows.chunks(64).zip(usable.chunks(64)) {
        let refs: Vec<&Tensor> = chunk.iter().collect();
        let sets = predict_batch(&refs, &checkpoint.params, &checkpoint.config)?;
        points.extend(seqs.iter().zip(sets).map(|(q, prediction)| EvalPoint {
            issued_at: q.end_time(),
            prediction,
        }));
    }
    Ok(points)
}

/// Forecasts of one model for one spill, as written by `predict`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionFile {
    pub spill_id: String,
    pub core: CoreKind,
    pub feature_normalizer: Normalizer,
    pub points: Vec<EvalPoint>,
}

#[derive(Serialize, Deserialize)]
struct PointRecord {
    issued_at: String,
    prediction: PredictionSet,
}

impl PredictionFile {
    pub fn to_json(&self) -> String {
        let points: Vec<PointRecord> = self
            .points
            .iter()
            .map(|p| PointRecord {
                issued_at: format_iso8601(p.issued_at),
                prediction: p.prediction.clone(),
            })
            .collect();
        serde_json::to_string(&json!({
            "schema_version": PREDICTIONS_SCHEMA_VERSION,
            "spill_id": self.spill_id,
            "core": self.core,
            "feature_normalizer": self.feature_normalizer,
            "points": points,
        }))
        .expect("predictions serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| format_err(format!("predictions: {e}")))?;
        check_version(&doc, "predictions")?;
        let field = |name: &str| doc.get(name).cloned().ok_or_else(|| format_err(format!("predictions: missing {name}")));
        let records: Vec<PointRecord> =
            serde_json::from_value(field("points")?).map_err(|e| format_err(format!("predictions: points: {e}")))?;
        let points = records
            .into_iter()
            .map(|r| {
                Ok(EvalPoint {
                    issued_at: parse_iso8601(&r.issued_at)
                        .ok_or_else(|| format_err(format!("predictions: bad time {:?}", r.issued_at)))?,
                    prediction: r.prediction,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            spill_id: field("spill_id")?.as_str().unwrap_or_default().to_string(),
            core: serde_json::from_value(field("core")?).map_err(|e| format_err(format!("predictions: core: {e}")))?,
            feature_normalizer: serde_json::from_value(field("feature_normalizer")?)
                .map_err(|e| format_err(format!("predictions: feature_normalizer: {e}")))?,
            points,
        })
    }

    /// Reconstructed boundaries, one Polygon feature per horizon.
    pub fn to_geojson(&self) -> Result<String> {
        let mut features = Vec::new();
        for p in &self.points {
            for h in &p.prediction.horizons {
                let shape = reconstruct_boundary(&self.feature_normalizer.denormalize(&h.mean[..self.feature_normalizer.dim()]))?;
                let mut ring: Vec<[f64; 2]> = shape.boundary.exterior().iter().map(|q| [q.lon, q.lat]).collect();
                ring.push(ring[0]);
                features.push(json!({
                    "type": "Feature",
                    "properties": {
                        "issued_at": format_iso8601(p.issued_at),
                        "valid_time": format_iso8601(p.issued_at + i64::from(h.horizon) * 3600),
                        "horizon": h.horizon,
                        "area_km2": shape.area_km2,
                    },
                    "geometry": {"type": "Polygon", "coordinates": [ring]},
                }));
            }
        }
        Ok(serde_json::to_string(&json!({"type": "FeatureCollection", "features": features})).expect("geojson serializes"))
    }

    pub fn evaluate(&self, truth: &[SpillObservation]) -> Result<EvalRun> {
        Ok(evaluate_run(&self.points, truth, &self.feature_normalizer)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} [{:.4}, {:.4}]", self.mean, self.low, self.high)
    }
}

/// Per-step series behind the pooled metrics.
const STEP_METRICS: [(&str, fn(&StepRecord) -> f64); 3] = [
    ("spatial_accuracy", |s| s.overlap),
    ("area_mae", |s| (s.area_pred - s.area_true).abs()),
    ("centroid_disp_km", |s| s.centroid_disp_km),
];

fn interval(values: &[f64], seed: u64) -> Result<Interval> {
    let (low, high) = bootstrap_ci(values, 0.95, DEFAULT_RESAMPLES, seed)?;
    Ok(Interval {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        low,
        high,
    })
}

/// 95% bootstrap intervals of the per-step metrics.
pub fn metric_intervals(steps: &[StepRecord], seed: u64) -> Result<BTreeMap<String, Interval>> {
    STEP_METRICS
        .iter()
        .map(|(name, f)| Ok((name.to_string(), interval(&steps.iter().map(f).collect::<Vec<_>>(), seed)?)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub metric: String,
    pub model: String,
    pub baseline: String,
    /// Absent when the test is undefined, for example identical series.
    pub result: Option<StatResult>,
    pub note: Option<String>,
}

/// Paired tests of `a` against `b` on steps matched by valid time and horizon.
pub fn paired_tests(a: &[StepRecord], b: &[StepRecord], labels: (&str, &str), seed: u64) -> Result<Vec<PairedComparison>> {
    let index: BTreeMap<(i64, u32), &StepRecord> = b.iter().map(|s| ((s.valid_time, s.horizon), s)).collect();
    let pairs: Vec<(&StepRecord, &StepRecord)> = a
        .iter()
        .filter_map(|s| index.get(&(s.valid_time, s.horizon)).map(|t| (s, *t)))
        .collect();
    if pairs.is_empty() {
        return Err(EvalError::Alignment("no steps in common".into()).into());
    }
    Ok(STEP_METRICS
        .iter()
        .map(|(name, f)| {
            let x: Vec<f64> = pairs.iter().map(|(s, _)| f(s)).collect();
            let y: Vec<f64> = pairs.iter().map(|(_, t)| f(t)).collect();
            let (result, note) = match compare_paired(&x, &y, seed) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            PairedComparison {
                metric: name.to_string(),
                model: labels.0.into(),
                baseline: labels.1.into(),
                result,
                note,
            }
        })
        .collect())
}

/// Averages spill-level reports; step metrics are pooled over all steps.
pub fn pool_runs(runs: &[EvalRun]) -> Result<(MetricReport, Vec<StepRecord>)> {
    let steps: Vec<StepRecord> = runs.iter().flat_map(|r| r.steps.iter().cloned()).collect();
    if steps.is_empty() {
        return Err(EvalError::EmptyInput.into());
    }
    let n = steps.len() as f64;
    let k = runs.len() as f64;
    let report = MetricReport {
        area_mae: steps.iter().map(|s| (s.area_pred - s.area_true).abs()).sum::<f64>() / n,
        centroid_disp_km: steps.iter().map(|s| s.centroid_disp_km).sum::<f64>() / n,
        overlap_ratio: steps.iter().map(|s| s.overlap).sum::<f64>() / n,
        temporal_consistency: runs.iter().map(|r| r.report.temporal_consistency).sum::<f64>() / k,
        cv_percent: runs.iter().map(|r| r.report.cv_percent).sum::<f64>() / k,
        drift_velocity: runs.iter().flat_map(|r| r.report.drift_velocity.iter().copied()).collect(),
    };
    Ok((report, steps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    /// Synthetic scenario used when no dataset is given.
    pub kind: u32,
    pub train_spills: usize,
    pub test_spills: usize,
    /// Training windows, taken in order from the training spills.
    pub windows: usize,
    pub duration_h: u32,
    /// Shared epoch budget; each core's own default when absent.
    pub max_epochs: Option<usize>,
    /// Shared early-stopping patience; each core's own default when absent.
    pub patience: Option<usize>,
    pub train_fraction: f64,
    pub cores: Vec<CoreKind>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            kind: 3,
            train_spills: 6,
            test_spills: 2,
            windows: 200,
            duration_h: 72,
            max_epochs: None,
            patience: None,
            train_fraction: 0.8,
            cores: CoreKind::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverRow {
    pub core: CoreKind,
    pub label: String,
    pub train_seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub epoch0_val_mse: f64,
    pub best_val_mse: f64,
    pub train_seconds: f64,
    pub metrics: MetricReport,
    /// Predicted areas at the shortest horizon over the test spills.
    pub area_stats: SummaryStats,
    pub intervals: BTreeMap<String, Interval>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub rows: Vec<SolverRow>,
    /// Each LTC core against the LSTM baseline.
    pub tests: Vec<PairedComparison>,
}

impl ComparisonReport {
    pub fn row(&self, core: CoreKind) -> Option<&SolverRow> {
        self.rows.iter().find(|r| r.core == core)
    }

    pub fn to_json(&self) -> String {
        let mut doc = serde_json::to_value(self).expect("report serializes");
        doc["schema_version"] = json!(REPORT_SCHEMA_VERSION);
        serde_json::to_string_pretty(&doc).expect("report serializes")
    }

    /// Area statistics per model.
    pub fn area_table_csv(&self) -> String {
        let mut out = String::from("model,mean_area_km2,std_dev_km2,max_area_km2,min_area_km2,area_range_km2,time_steps\n");
        for r in &self.rows {
            let s = &r.area_stats;
            out.push_str(&format!(
                "{},{:.4},{:.4},{:.4},{:.4},{:.4},{}\n",
                r.label, s.mean, s.std, s.max, s.min, s.range, s.count
            ));
        }
        out
    }

    /// Metric intervals per model with p-values against the baseline.
    pub fn metric_table_csv(&self) -> String {
        let ltc: Vec<&SolverRow> = self.rows.iter().filter(|r| r.core != CoreKind::Lstm).collect();
        let mut out = String::from("metric");
        for r in &self.rows {
            out.push_str(&format!(",{} mean [95% CI]", r.label));
        }
        for r in &ltc {
            out.push_str(&format!(",p {} vs LSTM", r.label));
        }
        out.push('\n');
        for (name, _) in STEP_METRICS {
            out.push_str(name);
            for r in &self.rows {
                out.push_str(&format!(",\"{}\"", r.intervals[name]));
            }
            for r in &ltc {
                let p = self
                    .tests
                    .iter()
                    .find(|t| t.metric == name && t.model == r.label)
                    .and_then(|t| t.result)
                    .map(|s| format!("{:.4}", s.p_value))
                    .unwrap_or_else(|| "n/a".into());
                out.push_str(&format!(",{p}"));
            }
            out.push('\n');
        }
        out.push_str("temporal_consistency");
        for r in &self.rows {
            out.push_str(&format!(",{:.6}", r.metrics.temporal_consistency));
        }
        out.push_str(&",".repeat(ltc.len()));
        out.push('\n');
        out
    }
}

/// Per-core training seed derived from the master seed.
pub fn core_seed(master: u64, core: CoreKind) -> u64 {
    let i = CoreKind::ALL.iter().position(|c| *c == core).expect("known core") as u64;
    master.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i)
}

/// Trains every configured core on `train` and scores each on `test`.
pub fn compare_solvers(train: &SequenceDataset, test: &SequenceDataset, config: &CompareConfig, seed: u64) -> Result<ComparisonReport> {
    if config.cores.is_empty() {
        return Err(format_err("no cores to compare"));
    }
    let results: Vec<Result<(SolverRow, Vec<StepRecord>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .cores
            .iter()
            .map(|&core| scope.spawn(move || compare_one(train, test, config, seed, core)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread")).collect()
    });
    let mut rows = Vec::new();
    let mut steps = Vec::new();
    for r in results {
        let (row, s) = r?;
        rows.push(row);
        steps.push(s);
    }
    let mut tests = Vec::new();
    if let Some(b) = rows.iter().position(|r| r.core == CoreKind::Lstm) {
        for (i, row) in rows.iter().enumerate().filter(|(i, _)| *i != b) {
            tests.extend(paired_tests(&steps[i], &steps[b], (&row.label, &rows[b].label), seed)?);
        }
    }
    Ok(ComparisonReport { seed, rows, tests })
}

fn compare_one(
    train: &SequenceDataset,
    test: &SequenceDataset,
    config: &CompareConfig,
    seed: u64,
    core: CoreKind,
) -> Result<(SolverRow, Vec<StepRecord>)> {
    let model = ModelConfig::with_core(core);
    let mut tc = TrainConfig::for_core(core);
    tc.seed = core_seed(seed, core);
    if let Some(e) = config.max_epochs {
        tc.max_epochs = e;
    }
    if let Some(p) = config.patience {
        tc.patience = p;
    }
    let started = Instant::now();
    let (checkpoint, outcome) = train_checkpoint(train, &model, &tc, config.train_fraction)?;
    let train_seconds = started.elapsed().as_secs_f64();
    let runs = test
        .spills
        .iter()
        .map(|spill| Ok(evaluate_run(&forecast(&checkpoint, spill)?, &spill.truth, &checkpoint.feature_normalizer)?))
        .collect::<Result<Vec<_>>>()?;
    let (metrics, steps) = pool_runs(&runs)?;
    let shortest = model.horizons[0];
    let areas: Vec<f64> = steps.iter().filter(|s| s.horizon == shortest).map(|s| s.area_pred).collect();
    Ok((
        SolverRow {
            core,
            label: core.label().into(),
            train_seed: tc.seed,
            best_epoch: outcome.best_epoch,
            epochs_run: outcome.history.len() - 1,
            epoch0_val_mse: outcome.history[0].val_mse,
            best_val_mse: outcome.best().val_mse,
            train_seconds,
            metrics,
            area_stats: summary_stats(&areas)?,
            intervals: metric_intervals(&steps, seed)?,
        },
        steps,
    ))
}

/// Synthetic train and test spills for one comparison seed.
pub fn comparison_data(config: &CompareConfig, seed: u64) -> Result<(SequenceDataset, SequenceDataset)> {
    let base = seed.wrapping_mul(1000);
    let train_seeds: Vec<u64> = (0..config.train_spills as u64).map(|i| base + i).collect();
    let test_seeds: Vec<u64> = (0..config.test_spills as u64).map(|i| base + 500 + i).collect();
    let mut train = scenario_dataset(config.kind, &train_seeds, config.duration_h)?;
    train.limit_windows(config.windows);
    Ok((train, scenario_dataset(config.kind, &test_seeds, config.duration_h)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_round_trip() {
        let mut d = scenario_dataset(2, &[1, 2], 72).unwrap();
        let text = d.to_json();
        assert_eq!(SequenceDataset::from_json(&text).unwrap(), d);
        d.limit_windows(40);
        assert_eq!(d.complete_windows(), 40);
        assert!(SequenceDataset::from_json(&text.replacen("\"1.0\"", "\"2.0\"", 1)).is_err());
    }

    #[test]
    fn prediction_file_round_trip() {
        let d = scenario_dataset(1, &[4], 72).unwrap();
        let (ck, _) = train_checkpoint(
            &d,
            &ModelConfig::miniature(CoreKind::Euler),
            &TrainConfig {
                max_epochs: 1,
                ..TrainConfig::for_core(CoreKind::Euler)
            },
            0.8,
        )
        .unwrap();
        let file = PredictionFile {
            spill_id: d.spills[0].spill_id.clone(),
            core: CoreKind::Euler,
            feature_normalizer: ck.feature_normalizer.clone(),
            points: forecast(&ck, &d.spills[0]).unwrap(),
        };
        assert_eq!(file.points.len(), d.complete_windows());
        assert_eq!(PredictionFile::from_json(&file.to_json()).unwrap(), file);
    }
}
