//! Composite loss, AdamW, and the early-stopped training loop.

use crate::features::{FeatureSequence, Normalizer, AUX_DIM, FEATURE_DIM};
use crate::model::{CoreKind, ModelConfig, ModelError, ModelGraph, ModelParams};
use crate::tensor::{ParamRegistry, Tape, Tensor, TensorError, Var};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("numerical error in epoch {epoch}: {message}")]
    Numerical { epoch: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Shape(#[from] TensorError),
    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// Improvement in validation loss smaller than this counts as none.
pub const MIN_DELTA: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub core: CoreKind,
    pub alpha: f64,
    pub beta: f64,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_decay: f64,
}

impl TrainConfig {
    /// Per-core defaults.
    pub fn for_core(core: CoreKind) -> Self {
        let (alpha, lr, patience) = match core {
            CoreKind::Rk4 => (0.05, 3e-4, 15),
            CoreKind::FusedExplicit => (0.1, 5e-4, 12),
            CoreKind::Euler => (0.2, 1e-3, 10),
            CoreKind::Lstm => (0.1, 1e-3, 10),
        };
        Self {
            core,
            alpha,
            beta: 0.5,
            lr,
            max_epochs: 150,
            patience,
            batch_size: 16,
            seed: 0,
            weight_decay: 0.01,
        }
    }

    /// Parses a run config; absent fields take the defaults for its `core`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        let core: CoreKind = match value.get("core") {
            Some(c) => serde_json::from_value(c.clone()).map_err(|e| TrainError::Config(format!("core: {e}")))?,
            None => CoreKind::Rk4,
        };
        let mut merged = serde_json::to_value(Self::for_core(core)).expect("config serializes");
        if let (Some(base), Some(over)) = (merged.as_object_mut(), value.as_object()) {
            for (k, v) in over {
                if !base.contains_key(k) {
                    return Err(TrainError::Config(format!("unknown field {k:?}")));
                }
                base.insert(k.clone(), v.clone());
            }
        }
        let config: Self = serde_json::from_value(merged).map_err(|e| TrainError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if self.lr < 0.0 || self.alpha < 0.0 || self.beta < 0.0 || self.weight_decay < 0.0 {
            return Err(TrainError::Config("lr, alpha, beta and weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

/// `L_mse + α·L_smooth + β·L_area` over per-horizon B × 28 predictions.
pub fn loss_total<'t>(pred: &[Var<'t>], target: &[Var<'t>], alpha: f64, beta: f64) -> Result<Var<'t>> {
    Ok(loss_parts(pred, target)?.total(alpha, beta)?)
}

/// The three loss terms, kept apart for reporting.
#[derive(Clone, Copy, Debug)]
pub struct LossParts<'t> {
    pub mse: Var<'t>,
    pub smooth: Var<'t>,
    pub area: Var<'t>,
}

impl<'t> LossParts<'t> {
    pub fn total(&self, alpha: f64, beta: f64) -> std::result::Result<Var<'t>, TensorError> {
        self.mse.add(self.smooth.scale(alpha))?.add(self.area.scale(beta))
    }
}

pub fn loss_parts<'t>(pred: &[Var<'t>], target: &[Var<'t>]) -> Result<LossParts<'t>> {
    let Some(first) = pred.first() else {
        return Err(TrainError::EmptyDataset("no horizons".into()));
    };
    if pred.len() != target.len() {
        return Err(TensorError::ShapeMismatch {
            op: "loss_total",
            lhs: vec![pred.len()],
            rhs: vec![target.len()],
        }
        .into());
    }
    let tape = first.tape();
    let horizons = pred.len() as f64;
    let batch = first.shape()[0] as f64;
    let mut mse = tape.scalar(0.0);
    let mut area = tape.scalar(0.0);
    for (p, t) in pred.iter().zip(target) {
        let d = p.sub(*t)?;
        mse = mse.add(d.square().mean())?;
        let da = Var::concat(&[d.slice(1, 0, 1)?, d.slice(1, FEATURE_DIM, FEATURE_DIM + 1)?], 1)?;
        area = area.add(da.square().mean())?;
    }
    let mut smooth = tape.scalar(0.0);
    for pair in pred.windows(2) {
        smooth = smooth.add(pair[1].sub(pair[0])?.square().sum())?;
    }
    let pairs = (pred.len() - 1).max(1) as f64;
    Ok(LossParts {
        mse: mse.scale(1.0 / horizons),
        smooth: smooth.scale(1.0 / (pairs * batch)),
        area: area.scale(1.0 / horizons),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// AdamW with decoupled weight decay; moment state is keyed by parameter name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    state: BTreeMap<String, Moments>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            state: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update of every parameter that has a gradient of the same name.
    pub fn step(&mut self, params: Vec<(String, &mut Tensor)>, grads: &[(String, Tensor)]) {
        self.step += 1;
        let t = self.step as i32;
        let (c1, c2) = (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t));
        let grads: BTreeMap<&str, &Tensor> = grads.iter().map(|(n, g)| (n.as_str(), g)).collect();
        for (name, p) in params {
            let Some(g) = grads.get(name.as_str()) else { continue };
            let n = p.numel();
            let st = self.state.entry(name).or_insert_with(|| Moments {
                m: vec![0.0; n],
                v: vec![0.0; n],
            });
            for (i, theta) in p.data_mut().iter_mut().enumerate() {
                let gi = g.data()[i];
                *theta -= self.lr * self.weight_decay * *theta;
                st.m[i] = self.beta1 * st.m[i] + (1.0 - self.beta1) * gi;
                st.v[i] = self.beta2 * st.v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = st.m[i] / c1;
                let v_hat = st.v[i] / c2;
                *theta -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// One normalized training example.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// T × 25, z-scored and clipped.
    pub window: Tensor,
    /// One 1 × 28 row per horizon, z-scored (not clipped).
    pub targets: Vec<Tensor>,
}

/// Z-score without clipping; used for targets.
pub fn standardize(n: &Normalizer, x: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(n.mu.iter().zip(&n.sigma))
        .map(|(v, (m, s))| (v - m) / s)
        .collect()
}

/// Normalized train/validation split with the normalizers fitted on the training part.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedData {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub feature_normalizer: Normalizer,
    pub aux_normalizer: Normalizer,
}

/// Normalizes the inputs and the aux targets of a window with fitted normalizers.
pub fn to_sample(seq: &FeatureSequence, features: &Normalizer, aux: &Normalizer) -> Option<Sample> {
    let rows: Vec<Vec<f64>> = seq.window.iter().map(|v| features.normalize(v.as_slice())).collect();
    let targets = seq
        .horizon_targets
        .iter()
        .map(|h| {
            let t = h.target.as_ref()?;
            let mut z = standardize(features, &t[..FEATURE_DIM]);
            z.extend(standardize(aux, &t[FEATURE_DIM..]));
            Some(Tensor::row(&z))
        })
        .collect::<Option<Vec<_>>>()?;
    Some(Sample {
        window: Tensor::from_rows(&rows).expect("windows are rectangular"),
        targets,
    })
}

/// Keeps windows with every horizon target, splits them 80/20 in order, and
/// fits both normalizers on the training block.
pub fn prepare(sequences: &[FeatureSequence], train_fraction: f64) -> Result<PreparedData> {
    let complete: Vec<&FeatureSequence> = sequences.iter().filter(|s| s.targets_complete()).collect();
    if complete.len() < 2 {
        return Err(TrainError::EmptyDataset(format!(
            "{} window(s) with complete targets; at least 2 are needed",
            complete.len()
        )));
    }
    let n_train = ((complete.len() as f64 * train_fraction).round() as usize).clamp(1, complete.len() - 1);
    let (train_seqs, val_seqs) = complete.split_at(n_train);
    let features = Normalizer::fit(train_seqs.iter().flat_map(|s| s.window.iter().map(|v| v.as_slice())))
        .map_err(|e| TrainError::Config(e.to_string()))?;
    let aux_rows: Vec<Vec<f64>> = train_seqs
        .iter()
        .flat_map(|s| s.horizon_targets.iter())
        .filter_map(|h| h.target.as_ref().map(|t| t[FEATURE_DIM..FEATURE_DIM + AUX_DIM].to_vec()))
        .collect();
    let aux = Normalizer::fit(aux_rows.iter().map(Vec::as_slice)).map_err(|e| TrainError::Config(e.to_string()))?;
    let conv = |s: &[&FeatureSequence]| -> Vec<Sample> {
        s.iter().filter_map(|q| to_sample(q, &features, &aux)).collect()
    };
    Ok(PreparedData {
        train: conv(train_seqs),
        val: conv(val_seqs),
        feature_normalizer: features,
        aux_normalizer: aux,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Mean-squared-error term of the validation loss.
    pub val_mse: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Epoch 0 is the untrained model.
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn best(&self) -> &EpochRecord {
        &self.history[self.best_epoch]
    }

    /// One row per epoch; `best_val_loss` is the best value accepted by early stopping so far.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_mse,best_val_loss,lr\n");
        let mut best = f64::INFINITY;
        for r in &self.history {
            if r.val_loss < best - MIN_DELTA {
                best = r.val_loss;
            }
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.train_loss, r.val_loss, r.val_mse, best, r.lr
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct BatchLoss {
    total: f64,
    mse: f64,
}

fn batch_loss(
    params: &ModelParams,
    model: &ModelConfig,
    train: &TrainConfig,
    batch: &[&Sample],
    dropout_seed: Option<u64>,
    grads: bool,
) -> Result<(BatchLoss, Vec<(String, Tensor)>)> {
    let tape = Tape::new();
    let mut reg = ParamRegistry::new(&tape);
    let graph = ModelGraph::register(&mut reg, params, model)?;
    let windows: Vec<&Tensor> = batch.iter().map(|s| &s.window).collect();
    let out = graph.forward(&tape, &windows, dropout_seed)?;
    let preds: Vec<Var> = out.iter().map(|o| o.mean).collect();
    let targets = (0..preds.len())
        .map(|h| {
            let rows: Vec<Vec<f64>> = batch.iter().map(|s| s.targets[h].data().to_vec()).collect();
            Ok(tape.constant(Tensor::from_rows(&rows)?))
        })
        .collect::<std::result::Result<Vec<Var>, TensorError>>()?;
    let parts = loss_parts(&preds, &targets)?;
    let total = parts.total(train.alpha, train.beta)?;
    let loss = BatchLoss {
        total: total.item(),
        mse: parts.mse.item(),
    };
    if !grads {
        return Ok((loss, Vec::new()));
    }
    tape.backward(total)?;
    Ok((loss, reg.gradients()))
}

/// Mean loss over `samples`, evaluated without dropout in fixed chunks.
pub fn evaluate_loss(params: &ModelParams, model: &ModelConfig, train: &TrainConfig, samples: &[Sample]) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut mse = 0.0;
    for chunk in samples.chunks(64) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let (l, _) = batch_loss(params, model, train, &refs, None, false)?;
        total += l.total * chunk.len() as f64;
        mse += l.mse * chunk.len() as f64;
    }
    let n = samples.len() as f64;
    Ok((total / n, mse / n))
}

/// Trains from a seeded initialization, keeping the parameters with the best
/// validation loss. Stops once `patience + 1` consecutive epochs fail to
/// improve on the best by [`MIN_DELTA`].
pub fn train_model(data: &PreparedData, model: &ModelConfig, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_callback(data, model, config, |_| {})
}

pub fn train_with_callback(
    data: &PreparedData,
    model: &ModelConfig,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if model.core != config.core {
        return Err(TrainError::Config(format!(
            "model core {:?} differs from training core {:?}",
            model.core, config.core
        )));
    }
    if data.train.is_empty() || data.val.is_empty() {
        return Err(TrainError::EmptyDataset(format!(
            "{} training and {} validation samples",
            data.train.len(),
            data.val.len()
        )));
    }
    let mut params = ModelParams::init(model, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_7a1e);
    let mut opt = AdamW::new(config.lr, config.weight_decay);
    let numerical = |epoch: usize, e: TrainError| match e {
        TrainError::Model(ModelError::Numerical(m)) => TrainError::Numerical { epoch, message: m },
        other => other,
    };

    let (train0, _) = evaluate_loss(&params, model, config, &data.train).map_err(|e| numerical(0, e))?;
    let (val0, mse0) = evaluate_loss(&params, model, config, &data.val).map_err(|e| numerical(0, e))?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: train0,
        val_loss: val0,
        val_mse: mse0,
        lr: config.lr,
    }];
    on_epoch(&history[0]);
    let mut best = (0usize, val0, params.clone());
    let mut bad = 0usize;
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &data.train[i]).collect();
            let dropout = (model.core == CoreKind::Lstm).then(|| rng.random::<u64>());
            let (loss, grads) =
                batch_loss(&params, model, config, &batch, dropout, true).map_err(|e| numerical(epoch, e))?;
            if !loss.total.is_finite() {
                return Err(TrainError::Numerical {
                    epoch,
                    message: "non-finite training loss".into(),
                });
            }
            sum += loss.total * batch.len() as f64;
            opt.step(params.named_mut(model), &grads);
        }
        let (val, mse) = evaluate_loss(&params, model, config, &data.val).map_err(|e| numerical(epoch, e))?;
        if !val.is_finite() {
            return Err(TrainError::Numerical {
                epoch,
                message: "non-finite validation loss".into(),
            });
        }
        let record = EpochRecord {
            epoch,
            train_loss: sum / data.train.len() as f64,
            val_loss: val,
            val_mse: mse,
            lr: config.lr,
        };
        on_epoch(&record);
        history.push(record);
        if val < best.1 - MIN_DELTA {
            best = (epoch, val, params.clone());
            bad = 0;
        } else {
            bad += 1;
            if bad > config.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        params: best.2,
        history,
        best_epoch: best.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows<'t>(tape: &'t Tape, v: &[&[f64]]) -> Var<'t> {
        tape.constant(Tensor::from_rows(&v.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap())
    }

    #[test]
    fn defaults_per_core() {
        let c = TrainConfig::for_core(CoreKind::Rk4);
        assert_eq!((c.alpha, c.lr, c.max_epochs, c.beta, c.batch_size), (0.05, 3e-4, 150, 0.5, 16));
        let c = TrainConfig::for_core(CoreKind::FusedExplicit);
        assert_eq!((c.alpha, c.lr), (0.1, 5e-4));
        let c = TrainConfig::for_core(CoreKind::Euler);
        assert_eq!((c.alpha, c.lr), (0.2, 1e-3));
        let c = TrainConfig::from_json(r#"{"core": "euler", "seed": 4}"#).unwrap();
        assert_eq!((c.seed, c.patience), (4, 10));
        assert!(TrainConfig::from_json(r#"{"core": "euler", "sede": 4}"#).is_err());
    }

    #[test]
    fn loss_examples() {
        let tape = Tape::new();
        let a: Vec<f64> = (0..28).map(f64::from).collect();
        let b: Vec<f64> = (0..28).map(|i| f64::from(i) * 0.5).collect();
        let p = [rows(&tape, &[&a]), rows(&tape, &[&b])];
        let parts = loss_parts(&p, &p).unwrap();
        assert_eq!(parts.mse.item(), 0.0);
        assert_eq!(parts.area.item(), 0.0);
        let smooth: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum();
        assert!((parts.smooth.item() - smooth).abs() < 1e-9);
        let total = loss_total(&p, &p, 0.3, 0.5).unwrap().item();
        assert!((total - 0.3 * smooth).abs() < 1e-9);

        let same = [rows(&tape, &[&a]), rows(&tape, &[&a])];
        assert_eq!(loss_parts(&same, &p).unwrap().smooth.item(), 0.0);
        assert_eq!(loss_parts(&p[..1], &p[..1]).unwrap().smooth.item(), 0.0);
    }

    #[test]
    fn area_term_uses_area_dims() {
        let tape = Tape::new();
        let zero = vec![0.0; 28];
        let mut hit = zero.clone();
        hit[0] = 2.0;
        hit[25] = 4.0;
        hit[3] = 100.0;
        let parts = loss_parts(&[rows(&tape, &[&hit])], &[rows(&tape, &[&zero])]).unwrap();
        assert!((parts.area.item() - (4.0 + 16.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn adamw_one_step_closed_form() {
        let mut opt = AdamW::new(0.1, 0.0);
        let mut p = Tensor::scalar(1.0);
        opt.step(vec![("w".into(), &mut p)], &[("w".into(), Tensor::scalar(0.5))]);
        // m̂ = g, v̂ = g², so the step is lr·g/(|g| + ε)
        let expect = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
        assert!((p.item() - expect).abs() < 1e-15);
    }

    #[test]
    fn adamw_zero_gradient_cases() {
        let mut opt = AdamW::new(0.01, 0.0);
        let mut p = Tensor::row(&[1.0, -2.0]);
        opt.step(vec![("w".into(), &mut p)], &[("w".into(), Tensor::zeros(&[1, 2]))]);
        assert_eq!(p.data(), &[1.0, -2.0]);

        let mut opt = AdamW::new(0.01, 0.01);
        let mut p = Tensor::row(&[1.0, -2.0]);
        opt.step(vec![("w".into(), &mut p)], &[("w".into(), Tensor::zeros(&[1, 2]))]);
        assert_eq!(p.data(), &[1.0 * (1.0 - 0.01 * 0.01), -2.0 * (1.0 - 0.01 * 0.01)]);

        let mut opt = AdamW::new(0.0, 0.01);
        let mut p = Tensor::row(&[0.1, 1e300]);
        let before = p.clone();
        opt.step(vec![("w".into(), &mut p)], &[("w".into(), Tensor::row(&[3.0, -7.0]))]);
        assert_eq!(p, before);
    }
}
