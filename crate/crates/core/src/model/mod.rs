//! The forecasting network: input projection, recurrent core, multi-head
//! attention, shared trunk, and per-horizon mean and uncertainty layers.
//!
//! LTC cores run `projection → LTC → attention`; the LSTM baseline feeds the
//! raw window to its two layers and shares only the output head.

mod checkpoint;

pub use checkpoint::{Checkpoint, CHECKPOINT_SCHEMA_VERSION};

use crate::features::{FEATURE_DIM, TARGET_DIM};
use crate::lstm::{LstmParams, LstmVars, LAYER_SIZES};
use crate::ltc::{LtcError, LtcParams, LtcVars, SolverKind};
use crate::tensor::{ParamRegistry, Tape, Tensor, TensorError, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Shape(#[from] TensorError),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl From<LtcError> for ModelError {
    fn from(e: LtcError) -> Self {
        match e {
            LtcError::Shape(s) => ModelError::Shape(s),
            other => ModelError::Numerical(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoreKind {
    Rk4,
    FusedExplicit,
    Euler,
    Lstm,
}

impl CoreKind {
    pub const ALL: [CoreKind; 4] = [CoreKind::Rk4, CoreKind::FusedExplicit, CoreKind::Euler, CoreKind::Lstm];

    pub fn solver(self) -> Option<SolverKind> {
        match self {
            CoreKind::Rk4 => Some(SolverKind::Rk4),
            CoreKind::FusedExplicit => Some(SolverKind::FusedExplicit),
            CoreKind::Euler => Some(SolverKind::Euler),
            CoreKind::Lstm => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CoreKind::Lstm => "lstm",
            other => other.solver().expect("ltc core").name(),
        }
    }

    /// Row label used in solver comparison reports.
    pub fn label(self) -> &'static str {
        match self {
            CoreKind::Rk4 => "LTC RK4",
            CoreKind::FusedExplicit => "LTC Explicit",
            CoreKind::Euler => "LTC Euler",
            CoreKind::Lstm => "LSTM",
        }
    }
}

impl From<SolverKind> for CoreKind {
    fn from(s: SolverKind) -> Self {
        match s {
            SolverKind::Rk4 => CoreKind::Rk4,
            SolverKind::FusedExplicit => CoreKind::FusedExplicit,
            SolverKind::Euler => CoreKind::Euler,
        }
    }
}

impl std::str::FromStr for CoreKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("lstm") {
            Ok(CoreKind::Lstm)
        } else {
            s.parse::<SolverKind>().map(CoreKind::from)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub core: CoreKind,
    pub input_dim: usize,
    pub hidden: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub output_dim: usize,
    pub horizons: Vec<u32>,
    pub lstm_sizes: Vec<usize>,
    pub lstm_dropout: f64,
    /// Model time per window step.
    pub dt: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            core: CoreKind::Rk4,
            input_dim: FEATURE_DIM,
            hidden: 128,
            heads: 4,
            head_dim: 32,
            output_dim: TARGET_DIM,
            horizons: vec![3, 7, 11, 15],
            lstm_sizes: LAYER_SIZES.to_vec(),
            lstm_dropout: crate::lstm::DROPOUT_P,
            dt: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn with_core(core: CoreKind) -> Self {
        Self {
            core,
            ..Self::default()
        }
    }

    /// Input 25, hidden 8, one head, two horizons.
    pub fn miniature(core: CoreKind) -> Self {
        Self {
            core,
            hidden: 8,
            heads: 1,
            head_dim: 8,
            horizons: vec![3, 7],
            lstm_sizes: vec![6, 4],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.heads * self.head_dim != self.hidden {
            return bad(format!("heads·head_dim = {} ≠ hidden {}", self.heads * self.head_dim, self.hidden));
        }
        if self.output_dim != TARGET_DIM {
            return bad(format!("output_dim must be {TARGET_DIM}"));
        }
        if self.horizons.is_empty() || self.horizons.windows(2).any(|w| w[1] <= w[0]) {
            return bad("horizons must be non-empty and ascending".into());
        }
        if self.core == CoreKind::Lstm && self.lstm_sizes.is_empty() {
            return bad("lstm_sizes must be non-empty".into());
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(0.0..1.0).contains(&self.lstm_dropout) {
            return bad(format!("lstm_dropout must lie in [0, 1), got {}", self.lstm_dropout));
        }
        Ok(())
    }

    /// Width of the vector entering the output head.
    pub fn trunk_dim(&self) -> usize {
        match self.core {
            CoreKind::Lstm => *self.lstm_sizes.last().expect("validated"),
            _ => self.hidden,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub w: Tensor,
    pub b: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attention {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub w_v: Tensor,
    pub w_o: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Core {
    Ltc {
        projection: Projection,
        ltc: LtcParams,
        attention: Attention,
    },
    Lstm(LstmParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonHead {
    pub mean_w: Tensor,
    pub mean_b: Tensor,
    pub unc_w: Tensor,
    pub unc_b: Tensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub core: Core,
    pub trunk_w: Tensor,
    pub trunk_b: Tensor,
    pub heads: Vec<HorizonHead>,
}

fn dense(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Tensor::matrix(
        fan_in,
        fan_out,
        (0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)).collect(),
    )
    .expect("sizes agree")
}

impl ModelParams {
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = config.hidden;
        let core = match config.core {
            CoreKind::Lstm => {
                let mut p = LstmParams::init(config.input_dim, &config.lstm_sizes, &mut rng);
                p.dropout_p = config.lstm_dropout;
                Core::Lstm(p)
            }
            _ => Core::Ltc {
                projection: Projection {
                    w: dense(&mut rng, config.input_dim, h),
                    b: Tensor::zeros(&[1, h]),
                    gamma: Tensor::filled(&[1, h], 1.0),
                    beta: Tensor::zeros(&[1, h]),
                },
                ltc: LtcParams::init(h, h, &mut rng),
                attention: Attention {
                    w_q: dense(&mut rng, h, h),
                    w_k: dense(&mut rng, h, h),
                    w_v: dense(&mut rng, h, h),
                    w_o: dense(&mut rng, h, h),
                },
            },
        };
        let d = config.trunk_dim();
        let trunk_w = dense(&mut rng, d, d);
        let heads = config
            .horizons
            .iter()
            .map(|_| HorizonHead {
                mean_w: dense(&mut rng, d, config.output_dim),
                mean_b: Tensor::zeros(&[1, config.output_dim]),
                unc_w: dense(&mut rng, d, config.output_dim),
                unc_b: Tensor::zeros(&[1, config.output_dim]),
            })
            .collect();
        Ok(Self {
            core,
            trunk_w,
            trunk_b: Tensor::zeros(&[1, d]),
            heads,
        })
    }

    /// Every learnable tensor with a stable name, in a fixed order.
    pub fn named(&self, config: &ModelConfig) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        match &self.core {
            Core::Ltc {
                projection,
                ltc,
                attention,
            } => {
                out.push(("proj.w".into(), &projection.w));
                out.push(("proj.b".into(), &projection.b));
                out.push(("proj.gamma".into(), &projection.gamma));
                out.push(("proj.beta".into(), &projection.beta));
                out.extend(ltc.named("ltc"));
                out.push(("attn.w_q".into(), &attention.w_q));
                out.push(("attn.w_k".into(), &attention.w_k));
                out.push(("attn.w_v".into(), &attention.w_v));
                out.push(("attn.w_o".into(), &attention.w_o));
            }
            Core::Lstm(p) => out.extend(p.named("lstm")),
        }
        out.push(("head.trunk_w".into(), &self.trunk_w));
        out.push(("head.trunk_b".into(), &self.trunk_b));
        for (h, head) in config.horizons.iter().zip(&self.heads) {
            out.push((format!("head.h{h}.mean_w"), &head.mean_w));
            out.push((format!("head.h{h}.mean_b"), &head.mean_b));
            out.push((format!("head.h{h}.unc_w"), &head.unc_w));
            out.push((format!("head.h{h}.unc_b"), &head.unc_b));
        }
        out
    }

    pub fn named_mut(&mut self, config: &ModelConfig) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        match &mut self.core {
            Core::Ltc {
                projection,
                ltc,
                attention,
            } => {
                out.push(("proj.w".into(), &mut projection.w));
                out.push(("proj.b".into(), &mut projection.b));
                out.push(("proj.gamma".into(), &mut projection.gamma));
                out.push(("proj.beta".into(), &mut projection.beta));
                out.extend(ltc.named_mut("ltc"));
                out.push(("attn.w_q".into(), &mut attention.w_q));
                out.push(("attn.w_k".into(), &mut attention.w_k));
                out.push(("attn.w_v".into(), &mut attention.w_v));
                out.push(("attn.w_o".into(), &mut attention.w_o));
            }
            Core::Lstm(p) => out.extend(p.named_mut("lstm")),
        }
        out.push(("head.trunk_w".into(), &mut self.trunk_w));
        out.push(("head.trunk_b".into(), &mut self.trunk_b));
        for (h, head) in config.horizons.iter().zip(self.heads.iter_mut()) {
            out.push((format!("head.h{h}.mean_w"), &mut head.mean_w));
            out.push((format!("head.h{h}.mean_b"), &mut head.mean_b));
            out.push((format!("head.h{h}.unc_w"), &mut head.unc_w));
            out.push((format!("head.h{h}.unc_b"), &mut head.unc_b));
        }
        out
    }

    pub fn tensors(&self, config: &ModelConfig) -> Vec<Tensor> {
        self.named(config).into_iter().map(|(_, t)| t.clone()).collect()
    }

    /// Overwrites every tensor, in [`ModelParams::named`] order.
    pub fn set_tensors(&mut self, config: &ModelConfig, values: Vec<Tensor>) -> Result<()> {
        let slots = self.named_mut(config);
        if slots.len() != values.len() {
            return Err(ModelError::Config(format!("{} tensors for {} slots", values.len(), slots.len())));
        }
        for ((name, slot), v) in slots.into_iter().zip(values) {
            if slot.shape() != v.shape() {
                return Err(ModelError::Checkpoint(format!(
                    "{name}: shape {:?} does not match {:?}",
                    v.shape(),
                    slot.shape()
                )));
            }
            *slot = v;
        }
        Ok(())
    }

    pub fn num_parameters(&self, config: &ModelConfig) -> usize {
        self.named(config).iter().map(|(_, t)| t.numel()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonPrediction {
    pub horizon: u32,
    pub mean: Vec<f64>,
    /// Non-negative spread per component.
    pub uncertainty: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub horizons: Vec<HorizonPrediction>,
}

/// Per-horizon outputs of a batched forward pass, each B × output_dim.
#[derive(Clone, Copy, Debug)]
pub struct HorizonOutput<'t> {
    pub mean: Var<'t>,
    pub uncertainty: Var<'t>,
}

enum CoreVars<'t> {
    Ltc {
        proj: [Var<'t>; 4],
        ltc: LtcVars<'t>,
        attn: [Var<'t>; 4],
    },
    Lstm(LstmVars<'t>),
}

/// Model parameters as tape leaves.
pub struct ModelGraph<'t> {
    config: ModelConfig,
    core: CoreVars<'t>,
    trunk: [Var<'t>; 2],
    heads: Vec<[Var<'t>; 4]>,
}

impl<'t> ModelGraph<'t> {
    pub fn register(reg: &mut ParamRegistry<'t>, params: &ModelParams, config: &ModelConfig) -> Result<Self> {
        let vars: Vec<Var<'t>> = params.named(config).into_iter().map(|(n, t)| reg.param(n, t)).collect();
        Self::from_vars(config, &vars)
    }

    /// Builds from leaves listed in [`ModelParams::named`] order.
    pub fn from_vars(config: &ModelConfig, vars: &[Var<'t>]) -> Result<Self> {
        config.validate()?;
        let (core, rest) = match config.core {
            CoreKind::Lstm => {
                let n = 8 * config.lstm_sizes.len();
                (CoreVars::Lstm(LstmVars::from_vars(&vars[..n], config.lstm_dropout)?), &vars[n..])
            }
            _ => (
                CoreVars::Ltc {
                    proj: [vars[0], vars[1], vars[2], vars[3]],
                    ltc: LtcVars::from_vars(&vars[4..9]),
                    attn: [vars[9], vars[10], vars[11], vars[12]],
                },
                &vars[13..],
            ),
        };
        let heads = rest[2..].chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
        Ok(Self {
            config: config.clone(),
            core,
            trunk: [rest[0], rest[1]],
            heads,
        })
    }

    /// Forward pass over a batch of T × input windows. `dropout_seed` enables
    /// training-mode dropout in the LSTM core.
    pub fn forward(&self, tape: &'t Tape, windows: &[&Tensor], dropout_seed: Option<u64>) -> Result<Vec<HorizonOutput<'t>>> {
        let batch = windows.len();
        let Some(first) = windows.first() else {
            return Err(ModelError::Config("empty batch".into()));
        };
        let steps = first.rows();
        for w in windows {
            if w.shape() != [steps, self.config.input_dim] {
                return Err(TensorError::ShapeMismatch {
                    op: "predict",
                    lhs: w.shape().to_vec(),
                    rhs: vec![steps, self.config.input_dim],
                }
                .into());
            }
        }
        // time-major stack: row t·B + b
        let mut stacked = Vec::with_capacity(steps * batch * self.config.input_dim);
        for t in 0..steps {
            for w in windows {
                stacked.extend_from_slice(w.row_slice(t));
            }
        }
        let x = tape.constant(Tensor::matrix(steps * batch, self.config.input_dim, stacked)?);

        let last = match &self.core {
            CoreVars::Lstm(lstm) => {
                let inputs = (0..steps)
                    .map(|t| x.slice(0, t * batch, (t + 1) * batch))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                *lstm.forward(tape, &inputs, dropout_seed)?.last().expect("non-empty window")
            }
            CoreVars::Ltc { proj, ltc, attn } => {
                let z = project(x, proj, steps * batch)?;
                let inputs = (0..steps)
                    .map(|t| z.slice(0, t * batch, (t + 1) * batch))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                let solver = self.config.core.solver().expect("ltc core");
                let states = ltc.forward(&inputs, solver, self.config.dt)?;
                // sample-major stack: row b·T + t
                let items: Vec<(Var<'t>, usize)> = (0..batch)
                    .flat_map(|b| states.iter().map(move |s| (*s, b)))
                    .collect();
                let s = Var::select_rows(&items)?;
                let (out, _) = attend(s, attn, batch, steps, self.config.heads, self.config.head_dim)?;
                let rows: Vec<(Var<'t>, usize)> = (0..batch).map(|b| (out, b * steps + steps - 1)).collect();
                Var::select_rows(&rows)?
            }
        };
        let trunk = last
            .matmul(self.trunk[0])?
            .add(self.trunk[1].expand_rows(batch)?)?
            .tanh();
        self.heads
            .iter()
            .map(|[mw, mb, uw, ub]| {
                Ok(HorizonOutput {
                    mean: trunk.matmul(*mw)?.add(mb.expand_rows(batch)?)?,
                    uncertainty: trunk.matmul(*uw)?.add(ub.expand_rows(batch)?)?.softplus(),
                })
            })
            .collect()
    }
}

/// `layer_norm(relu(x·W + b))·γ + β`.
fn project<'t>(x: Var<'t>, p: &[Var<'t>; 4], rows: usize) -> Result<Var<'t>> {
    let [w, b, gamma, beta] = *p;
    Ok(x.matmul(w)?
        .add(b.expand_rows(rows)?)?
        .relu()
        .layer_norm()?
        .mul(gamma.expand_rows(rows)?)?
        .add(beta.expand_rows(rows)?)?)
}

/// Multi-head self-attention with residual over `batch` sequences stacked
/// sample-major in `s` ((batch·steps) × hidden). Also returns the attention
/// weights, indexed `[sample][head]`.
fn attend<'t>(
    s: Var<'t>,
    p: &[Var<'t>; 4],
    batch: usize,
    steps: usize,
    heads: usize,
    head_dim: usize,
) -> Result<(Var<'t>, Vec<Vec<Var<'t>>>)> {
    let [w_q, w_k, w_v, w_o] = *p;
    let (q, k, v) = (s.matmul(w_q)?, s.matmul(w_k)?, s.matmul(w_v)?);
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut samples = Vec::with_capacity(batch);
    let mut weights = Vec::with_capacity(batch);
    for b in 0..batch {
        let (r0, r1) = (b * steps, (b + 1) * steps);
        let mut per_head = Vec::with_capacity(heads);
        let mut w_b = Vec::with_capacity(heads);
        for h in 0..heads {
            let (c0, c1) = (h * head_dim, (h + 1) * head_dim);
            let qh = q.slice(0, r0, r1)?.slice(1, c0, c1)?;
            let kh = k.slice(0, r0, r1)?.slice(1, c0, c1)?;
            let vh = v.slice(0, r0, r1)?.slice(1, c0, c1)?;
            let a = qh.matmul(kh.transpose()?)?.scale(scale).rowwise_softmax()?;
            per_head.push(a.matmul(vh)?);
            w_b.push(a);
        }
        samples.push(Var::concat(&per_head, 1)?);
        weights.push(w_b);
    }
    let heads_out = Var::concat(&samples, 0)?;
    Ok((heads_out.matmul(w_o)?.add(s)?, weights))
}

/// Attention over one T × hidden sequence: the output and each head's T × T weights.
pub fn attention(states: &Tensor, p: &Attention, heads: usize, head_dim: usize) -> Result<(Tensor, Vec<Tensor>)> {
    let tape = Tape::new();
    let vars = [
        tape.constant(p.w_q.clone()),
        tape.constant(p.w_k.clone()),
        tape.constant(p.w_v.clone()),
        tape.constant(p.w_o.clone()),
    ];
    let s = tape.constant(states.clone());
    let (out, w) = attend(s, &vars, 1, states.rows(), heads, head_dim)?;
    Ok((out.value(), w[0].iter().map(Var::value).collect()))
}

/// `layer_norm(relu(x·W + b))·γ + β` for each row of a T × input window.
pub fn input_projection(window: &Tensor, p: &Projection) -> Result<Tensor> {
    let tape = Tape::new();
    let vars = [
        tape.constant(p.w.clone()),
        tape.constant(p.b.clone()),
        tape.constant(p.gamma.clone()),
        tape.constant(p.beta.clone()),
    ];
    Ok(project(tape.constant(window.clone()), &vars, window.rows())?.value())
}

fn collect(config: &ModelConfig, outputs: &[HorizonOutput<'_>], batch: usize) -> Vec<PredictionSet> {
    let values: Vec<(Tensor, Tensor)> = outputs.iter().map(|o| (o.mean.value(), o.uncertainty.value())).collect();
    (0..batch)
        .map(|b| PredictionSet {
            horizons: config
                .horizons
                .iter()
                .zip(&values)
                .map(|(&h, (m, u))| HorizonPrediction {
                    horizon: h,
                    mean: m.row_slice(b).to_vec(),
                    uncertainty: u.row_slice(b).to_vec(),
                })
                .collect(),
        })
        .collect()
}

/// Inference on a batch of normalized windows.
pub fn predict_batch(windows: &[&Tensor], params: &ModelParams, config: &ModelConfig) -> Result<Vec<PredictionSet>> {
    let tape = Tape::new();
    let vars: Vec<Var> = params
        .named(config)
        .into_iter()
        .map(|(_, t)| tape.constant(t.clone()))
        .collect();
    let graph = ModelGraph::from_vars(config, &vars)?;
    let out = graph.forward(&tape, windows, None)?;
    let sets = collect(config, &out, windows.len());
    if sets
        .iter()
        .flat_map(|s| &s.horizons)
        .any(|h| h.mean.iter().chain(&h.uncertainty).any(|v| !v.is_finite()))
    {
        return Err(ModelError::Numerical("non-finite prediction".into()));
    }
    Ok(sets)
}

pub fn predict(window: &Tensor, params: &ModelParams, config: &ModelConfig) -> Result<PredictionSet> {
    Ok(predict_batch(&[window], params, config)?.remove(0))
}
