//! Two-layer LSTM baseline (128 then 64 units) with inverted dropout between layers.
//!
//! Gate weights are stored as `(hidden + input) × hidden` so that `[h_prev, x_t]`
//! multiplies on the left.

use crate::tensor::{ParamRegistry, Tape, Tensor, TensorError, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Result<T> = std::result::Result<T, TensorError>;

pub const LAYER_SIZES: [usize; 2] = [128, 64];
pub const DROPOUT_P: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub w_f: Tensor,
    pub w_i: Tensor,
    pub w_c: Tensor,
    pub w_o: Tensor,
    pub b_f: Tensor,
    pub b_i: Tensor,
    pub b_c: Tensor,
    pub b_o: Tensor,
}

impl LstmLayer {
    /// Uniform ±1/√(hidden + input) weights, zero biases except forget = 1.
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let fan_in = hidden + input;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut w = || {
            Tensor::matrix(fan_in, hidden, (0..fan_in * hidden).map(|_| rng.random_range(-bound..=bound)).collect())
                .expect("sizes agree")
        };
        Self {
            w_f: w(),
            w_i: w(),
            w_c: w(),
            w_o: w(),
            b_f: Tensor::filled(&[1, hidden], 1.0),
            b_i: Tensor::zeros(&[1, hidden]),
            b_c: Tensor::zeros(&[1, hidden]),
            b_o: Tensor::zeros(&[1, hidden]),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = Tensor::zeros(&[hidden + input, hidden]);
        let b = Tensor::zeros(&[1, hidden]);
        Self {
            w_f: w.clone(),
            w_i: w.clone(),
            w_c: w.clone(),
            w_o: w,
            b_f: b.clone(),
            b_i: b.clone(),
            b_c: b.clone(),
            b_o: b,
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_f.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_f.rows() - self.hidden()
    }

    fn tensors(&self) -> [(&'static str, &Tensor); 8] {
        [
            ("w_f", &self.w_f),
            ("w_i", &self.w_i),
            ("w_c", &self.w_c),
            ("w_o", &self.w_o),
            ("b_f", &self.b_f),
            ("b_i", &self.b_i),
            ("b_c", &self.b_c),
            ("b_o", &self.b_o),
        ]
    }

    fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor); 8] {
        [
            ("w_f", &mut self.w_f),
            ("w_i", &mut self.w_i),
            ("w_c", &mut self.w_c),
            ("w_o", &mut self.w_o),
            ("b_f", &mut self.b_f),
            ("b_i", &mut self.b_i),
            ("b_c", &mut self.b_c),
            ("b_o", &mut self.b_o),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub layers: Vec<LstmLayer>,
    pub dropout_p: f64,
}

impl LstmParams {
    pub fn init(input: usize, sizes: &[usize], rng: &mut impl Rng) -> Self {
        let mut layers = Vec::with_capacity(sizes.len());
        let mut fan = input;
        for &h in sizes {
            layers.push(LstmLayer::init(fan, h, rng));
            fan = h;
        }
        Self {
            layers,
            dropout_p: DROPOUT_P,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, LstmLayer::hidden)
    }

    pub fn named(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| {
                layer
                    .tensors()
                    .into_iter()
                    .map(move |(n, t)| (format!("{prefix}.layer{l}.{n}"), t))
            })
            .collect()
    }

    pub fn named_mut(&mut self, prefix: &str) -> Vec<(String, &mut Tensor)> {
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(l, layer)| {
                layer
                    .tensors_mut()
                    .into_iter()
                    .map(move |(n, t)| (format!("{prefix}.layer{l}.{n}"), t))
            })
            .collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One LSTM step for a single sample; returns `(h_t, c_t)`.
pub fn lstm_cell(x_t: &[f64], h_prev: &[f64], c_prev: &[f64], layer: &LstmLayer) -> Result<(Vec<f64>, Vec<f64>)> {
    let hidden = layer.hidden();
    if x_t.len() != layer.input_dim() || h_prev.len() != hidden || c_prev.len() != hidden {
        return Err(TensorError::ShapeMismatch {
            op: "lstm_cell",
            lhs: vec![h_prev.len(), x_t.len()],
            rhs: vec![hidden, layer.input_dim()],
        });
    }
    let z: Vec<f64> = h_prev.iter().chain(x_t).copied().collect();
    let gate = |w: &Tensor, b: &Tensor| -> Vec<f64> {
        let mut out = b.data().to_vec();
        for (k, zk) in z.iter().enumerate() {
            out.iter_mut().zip(w.row_slice(k)).for_each(|(o, wv)| *o += zk * wv);
        }
        out
    };
    let f: Vec<f64> = gate(&layer.w_f, &layer.b_f).into_iter().map(sigmoid).collect();
    let i: Vec<f64> = gate(&layer.w_i, &layer.b_i).into_iter().map(sigmoid).collect();
    let g: Vec<f64> = gate(&layer.w_c, &layer.b_c).into_iter().map(f64::tanh).collect();
    let o: Vec<f64> = gate(&layer.w_o, &layer.b_o).into_iter().map(sigmoid).collect();
    let c: Vec<f64> = (0..hidden).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
    let h = (0..hidden).map(|k| o[k] * c[k].tanh()).collect();
    Ok((h, c))
}

/// Inverted-dropout mask: each entry is 0 with probability `p`, else `1/(1−p)`.
pub fn dropout_mask(rng: &mut impl Rng, n: usize, p: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..n)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect()
}

/// Masks for `steps` timesteps of a `batch × width` activation, drawn in
/// time-major, row-major order from a seeded stream.
fn dropout_masks(seed: u64, steps: usize, batch: usize, width: usize, p: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps).map(|_| dropout_mask(&mut rng, batch * width, p)).collect()
}

/// Runs a single window (T × input) through every layer; returns T × last-layer states.
/// When `training`, inter-layer dropout uses masks derived from `seed`.
pub fn lstm_forward(window: &Tensor, params: &LstmParams, training: bool, seed: u64) -> Result<Tensor> {
    let steps = window.rows();
    let mut seq: Vec<Vec<f64>> = (0..steps).map(|t| window.row_slice(t).to_vec()).collect();
    for (l, layer) in params.layers.iter().enumerate() {
        if l > 0 && training && params.dropout_p > 0.0 {
            let masks = dropout_masks(seed.wrapping_add(l as u64), steps, 1, seq[0].len(), params.dropout_p);
            for (row, mask) in seq.iter_mut().zip(&masks) {
                row.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
            }
        }
        let hidden = layer.hidden();
        let (mut h, mut c) = (vec![0.0; hidden], vec![0.0; hidden]);
        let mut next = Vec::with_capacity(steps);
        for x in &seq {
            (h, c) = lstm_cell(x, &h, &c, layer)?;
            next.push(h.clone());
        }
        seq = next;
    }
    Tensor::from_rows(&seq)
}

/// LSTM parameters recorded on a tape; each layer's four gate matrices are
/// joined into one `(hidden + input) × 4·hidden` product per step.
#[derive(Clone, Debug)]
pub struct LstmVars<'t> {
    layers: Vec<(Var<'t>, Var<'t>, usize)>,
    dropout_p: f64,
}

impl<'t> LstmVars<'t> {
    pub fn register(reg: &mut ParamRegistry<'t>, prefix: &str, params: &LstmParams) -> Result<Self> {
        let vars: Vec<Var<'t>> = params
            .named(prefix)
            .into_iter()
            .map(|(n, t)| reg.param(n, t))
            .collect();
        Self::from_vars(&vars, params.dropout_p)
    }

    /// Builds from leaves listed in [`LstmParams::named`] order.
    pub fn from_vars(vars: &[Var<'t>], dropout_p: f64) -> Result<Self> {
        let layers = vars
            .chunks(8)
            .map(|v| {
                let hidden = v[0].shape()[1];
                Ok((Var::concat(&v[0..4], 1)?, Var::concat(&v[4..8], 1)?, hidden))
            })
            .collect::<Result<_>>()?;
        Ok(Self { layers, dropout_p })
    }

    /// Batched forward over `inputs[t]` (B × input); returns last-layer states per step.
    pub fn forward(&self, tape: &'t Tape, inputs: &[Var<'t>], dropout_seed: Option<u64>) -> Result<Vec<Var<'t>>> {
        let Some(first) = inputs.first() else {
            return Ok(Vec::new());
        };
        let batch = first.shape()[0];
        let mut seq = inputs.to_vec();
        for (l, &(w, b, hidden)) in self.layers.iter().enumerate() {
            if l > 0 && self.dropout_p > 0.0 {
                if let Some(seed) = dropout_seed {
                    let width = seq[0].shape()[1];
                    let masks = dropout_masks(seed.wrapping_add(l as u64), seq.len(), batch, width, self.dropout_p);
                    seq = seq
                        .iter()
                        .zip(masks)
                        .map(|(v, m)| v.mul(tape.constant(Tensor::matrix(batch, width, m)?)))
                        .collect::<Result<_>>()?;
                }
            }
            let bias = b.expand_rows(batch)?;
            let mut h = tape.constant(Tensor::zeros(&[batch, hidden]));
            let mut c = tape.constant(Tensor::zeros(&[batch, hidden]));
            let mut next = Vec::with_capacity(seq.len());
            for x in &seq {
                let z = Var::concat(&[h, *x], 1)?.matmul(w)?.add(bias)?;
                let f = z.slice(1, 0, hidden)?.sigmoid();
                let i = z.slice(1, hidden, 2 * hidden)?.sigmoid();
                let g = z.slice(1, 2 * hidden, 3 * hidden)?.tanh();
                let o = z.slice(1, 3 * hidden, 4 * hidden)?.sigmoid();
                c = f.mul(c)?.add(i.mul(g)?)?;
                h = o.mul(c.tanh())?;
                next.push(h);
            }
            seq = next;
        }
        Ok(seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_halve_the_cell() {
        let layer = LstmLayer::zeros(2, 3);
        let c = [0.8, -2.0, 0.0];
        let (h, c1) = lstm_cell(&[1.0, -1.0], &[0.0; 3], &c, &layer).unwrap();
        for k in 0..3 {
            assert!((c1[k] - 0.5 * c[k]).abs() < 1e-15);
            assert!((h[k] - 0.5 * (0.5 * c[k]).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_gates() {
        let mut layer = LstmLayer::zeros(1, 2);
        layer.b_f = Tensor::row(&[800.0, 800.0]);
        layer.b_i = Tensor::row(&[-800.0, -800.0]);
        let (_, c) = lstm_cell(&[3.0], &[0.1, 0.2], &[0.7, -0.4], &layer).unwrap();
        assert_eq!(c, vec![0.7, -0.4]);

        let mut layer = LstmLayer::zeros(1, 2);
        layer.b_i = Tensor::row(&[800.0, 800.0]);
        let (_, c) = lstm_cell(&[3.0], &[0.1, 0.2], &[0.0, 0.0], &layer).unwrap();
        assert_eq!(c, vec![0.0, 0.0]);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = LstmParams::init(5, &[6, 4], &mut rng);
        let w = Tensor::matrix(3, 5, (0..15).map(|v| f64::from(v) / 10.0).collect()).unwrap();
        let a = lstm_forward(&w, &params, false, 0).unwrap();
        assert_eq!(a, lstm_forward(&w, &params, false, 99).unwrap());
        assert_eq!(a.shape(), &[3, 4]);
        let b = lstm_forward(&w, &params, true, 5).unwrap();
        assert_eq!(b, lstm_forward(&w, &params, true, 5).unwrap());
        assert_ne!(a, b);
    }

    #[test]
    fn graph_matches_numeric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = LstmParams::init(3, &[5, 4], &mut rng);
        let w = Tensor::matrix(4, 3, (0..12).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        for (training, seed) in [(false, None), (true, Some(42))] {
            let reference = lstm_forward(&w, &params, training, seed.unwrap_or(0)).unwrap();
            let tape = Tape::new();
            let mut reg = ParamRegistry::new(&tape);
            let vars = LstmVars::register(&mut reg, "lstm", &params).unwrap();
            let inputs: Vec<Var> = (0..4).map(|t| tape.constant(Tensor::row(w.row_slice(t)))).collect();
            let out = vars.forward(&tape, &inputs, seed).unwrap();
            for t in 0..4 {
                for (a, b) in out[t].value().data().iter().zip(reference.row_slice(t)) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
