//! Liquid time-constant cell and its three integrators.
//!
//! Cell dynamics: `dx/dt = (−x + tanh(u·W_x + x·W_r + b)) / τ`, with τ = exp(log τ).
//! Weight matrices are stored input-major (`W_x` is input × hidden) so a
//! batch of row vectors multiplies on the left.
//!
//! Two parallel implementations exist: plain-vector functions for single
//! samples, and tape-recorded batched versions used in training. They are
//! tested against each other.

use crate::tensor::{ParamRegistry, Tensor, TensorError, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtcError {
    #[error(transparent)]
    Shape(#[from] TensorError),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("step size must be positive, got {0}")]
    InvalidStep(f64),
}

pub type Result<T> = std::result::Result<T, LtcError>;

/// Smallest fused-solver denominator accepted.
pub const MIN_DENOMINATOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Rk4,
    FusedExplicit,
    Euler,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Rk4, SolverKind::FusedExplicit, SolverKind::Euler];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Rk4 => "rk4",
            SolverKind::FusedExplicit => "fused_explicit",
            SolverKind::Euler => "euler",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rk4" => Ok(SolverKind::Rk4),
            "fused_explicit" | "fused" | "explicit" => Ok(SolverKind::FusedExplicit),
            "euler" => Ok(SolverKind::Euler),
            other => Err(format!("unknown solver {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LtcParams {
    /// input × hidden
    pub w_x: Tensor,
    /// hidden × hidden
    pub w_r: Tensor,
    /// 1 × hidden
    pub b: Tensor,
    /// 1 × hidden; τ = exp(log_tau)
    pub log_tau: Tensor,
    /// 1 × hidden amplitude of the fused update
    pub amp: Tensor,
}

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
    Tensor::matrix(rows, cols, data).expect("sizes agree")
}

impl LtcParams {
    /// Uniform ±1/√fan_in weights, zero bias, log τ uniform over [ln ½, ln 8], unit amplitude.
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let (lo, hi) = (0.5f64.ln(), 8f64.ln());
        Self {
            w_x: uniform(rng, input, hidden, 1.0 / (input as f64).sqrt()),
            w_r: uniform(rng, hidden, hidden, 1.0 / (hidden as f64).sqrt()),
            b: Tensor::zeros(&[1, hidden]),
            log_tau: Tensor::row(&(0..hidden).map(|_| rng.random_range(lo..=hi)).collect::<Vec<_>>()),
            amp: Tensor::filled(&[1, hidden], 1.0),
        }
    }

    /// All-zero weights with the given time constants.
    pub fn zeros(input: usize, hidden: usize, tau: f64) -> Self {
        Self {
            w_x: Tensor::zeros(&[input, hidden]),
            w_r: Tensor::zeros(&[hidden, hidden]),
            b: Tensor::zeros(&[1, hidden]),
            log_tau: Tensor::filled(&[1, hidden], tau.ln()),
            amp: Tensor::filled(&[1, hidden], 1.0),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w_r.rows()
    }

    pub fn tau(&self) -> Vec<f64> {
        self.log_tau.data().iter().map(|v| v.exp()).collect()
    }

    pub fn named(&self, prefix: &str) -> Vec<(String, &Tensor)> {
        vec![
            (format!("{prefix}.w_x"), &self.w_x),
            (format!("{prefix}.w_r"), &self.w_r),
            (format!("{prefix}.b"), &self.b),
            (format!("{prefix}.log_tau"), &self.log_tau),
            (format!("{prefix}.amp"), &self.amp),
        ]
    }

    pub fn named_mut(&mut self, prefix: &str) -> Vec<(String, &mut Tensor)> {
        vec![
            (format!("{prefix}.w_x"), &mut self.w_x),
            (format!("{prefix}.w_r"), &mut self.w_r),
            (format!("{prefix}.b"), &mut self.b),
            (format!("{prefix}.log_tau"), &mut self.log_tau),
            (format!("{prefix}.amp"), &mut self.amp),
        ]
    }

    fn check(&self, x: &[f64], u: &[f64]) -> Result<()> {
        let h = self.hidden();
        if x.len() != h || u.len() != self.input_dim() {
            return Err(TensorError::ShapeMismatch {
                op: "ltc",
                lhs: vec![x.len(), u.len()],
                rhs: vec![h, self.input_dim()],
            }
            .into());
        }
        Ok(())
    }
}

/// `tanh(u·W_x + x·W_r + b)`.
pub fn activation(x: &[f64], u: &[f64], p: &LtcParams) -> Result<Vec<f64>> {
    p.check(x, u)?;
    let h = p.hidden();
    let mut pre = p.b.data().to_vec();
    for (i, ui) in u.iter().enumerate() {
        let row = p.w_x.row_slice(i);
        pre.iter_mut().zip(row).for_each(|(a, w)| *a += ui * w);
    }
    for (i, xi) in x.iter().enumerate() {
        let row = p.w_r.row_slice(i);
        pre.iter_mut().zip(row).for_each(|(a, w)| *a += xi * w);
    }
    debug_assert_eq!(pre.len(), h);
    Ok(pre.into_iter().map(f64::tanh).collect())
}

pub fn derivative(x: &[f64], u: &[f64], p: &LtcParams) -> Result<Vec<f64>> {
    let f = activation(x, u, p)?;
    Ok(x.iter()
        .zip(&f)
        .zip(p.log_tau.data())
        .map(|((xi, fi), lt)| (fi - xi) / lt.exp())
        .collect())
}

/// Input-dependent time constant `τ / (1 + τ·f)`, a diagnostic.
pub fn effective_tau(x: &[f64], u: &[f64], p: &LtcParams) -> Result<Vec<f64>> {
    let f = activation(x, u, p)?;
    Ok(f.iter()
        .zip(p.log_tau.data())
        .map(|(fi, lt)| {
            let tau = lt.exp();
            tau / (1.0 + tau * fi)
        })
        .collect())
}

fn finite(x: Vec<f64>, solver: &str) -> Result<Vec<f64>> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(LtcError::Numerical(format!("{solver} step produced a non-finite state")))
    }
}

/// Fused semi-implicit step with state-adaptive step size `dt / (1 + ‖x‖₂)`.
pub fn step_fused(x: &[f64], u: &[f64], p: &LtcParams, dt: f64) -> Result<Vec<f64>> {
    if dt <= 0.0 {
        return Err(LtcError::InvalidStep(dt));
    }
    let f = activation(x, u, p)?;
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dt_eff = dt / (1.0 + norm);
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let inv_tau = (-p.log_tau.data()[i]).exp();
        let den = 1.0 + dt_eff * (inv_tau + f[i]);
        if den <= MIN_DENOMINATOR {
            return Err(LtcError::Numerical(format!("fused denominator {den:e} at unit {i}")));
        }
        out.push((x[i] + dt_eff * f[i] * p.amp.data()[i]) / den);
    }
    finite(out, "fused")
}

/// Classical fourth-order Runge–Kutta step from time `t` with step `h`;
/// `u_fn` supplies the input at `t`, `t + h/2` and `t + h`.
pub fn step_rk4(x: &[f64], u_fn: impl Fn(f64) -> Vec<f64>, p: &LtcParams, t: f64, h: f64) -> Result<Vec<f64>> {
    if h <= 0.0 {
        return Err(LtcError::InvalidStep(h));
    }
    let axpy = |a: &[f64], k: &[f64], s: f64| a.iter().zip(k).map(|(ai, ki)| ai + s * ki).collect::<Vec<_>>();
    let (u0, um, u1) = (u_fn(t), u_fn(t + h / 2.0), u_fn(t + h));
    let k1 = derivative(x, &u0, p)?;
    let k2 = derivative(&axpy(x, &k1, h / 2.0), &um, p)?;
    let k3 = derivative(&axpy(x, &k2, h / 2.0), &um, p)?;
    let k4 = derivative(&axpy(x, &k3, h), &u1, p)?;
    let out = (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    finite(out, "rk4")
}

pub fn step_euler(x: &[f64], u: &[f64], p: &LtcParams, dt: f64) -> Result<Vec<f64>> {
    if dt <= 0.0 {
        return Err(LtcError::InvalidStep(dt));
    }
    let d = derivative(x, u, p)?;
    finite(axpy_owned(x, &d, dt), "euler")
}

fn axpy_owned(a: &[f64], k: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(k).map(|(ai, ki)| ai + s * ki).collect()
}

/// One solver step with the input held constant over the step.
pub fn step(x: &[f64], u: &[f64], p: &LtcParams, solver: SolverKind, dt: f64) -> Result<Vec<f64>> {
    match solver {
        SolverKind::Rk4 => step_rk4(x, |_| u.to_vec(), p, 0.0, dt),
        SolverKind::FusedExplicit => step_fused(x, u, p, dt),
        SolverKind::Euler => step_euler(x, u, p, dt),
    }
}

/// States after each timestep of `window` (T × input), starting from zero.
pub fn forward_sequence(window: &Tensor, p: &LtcParams, solver: SolverKind, dt: f64) -> Result<Tensor> {
    if window.cols() != p.input_dim() {
        return Err(TensorError::ShapeMismatch {
            op: "forward_sequence",
            lhs: window.shape().to_vec(),
            rhs: vec![window.rows(), p.input_dim()],
        }
        .into());
    }
    let mut x = vec![0.0; p.hidden()];
    let mut out = Vec::with_capacity(window.rows() * p.hidden());
    for t in 0..window.rows() {
        x = step(&x, window.row_slice(t), p, solver, dt)?;
        out.extend_from_slice(&x);
    }
    Ok(Tensor::matrix(window.rows(), p.hidden(), out)?)
}

/// LTC parameters recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LtcVars<'t> {
    pub w_x: Var<'t>,
    pub w_r: Var<'t>,
    pub b: Var<'t>,
    pub log_tau: Var<'t>,
    pub amp: Var<'t>,
}

impl<'t> LtcVars<'t> {
    pub fn register(reg: &mut ParamRegistry<'t>, prefix: &str, p: &LtcParams) -> Self {
        let vars: Vec<Var<'t>> = p.named(prefix).into_iter().map(|(n, t)| reg.param(n, t)).collect();
        Self::from_vars(&vars)
    }

    /// Builds from five leaves in [`LtcParams::named`] order.
    pub fn from_vars(v: &[Var<'t>]) -> Self {
        Self {
            w_x: v[0],
            w_r: v[1],
            b: v[2],
            log_tau: v[3],
            amp: v[4],
        }
    }

    /// Batched sequence forward. `inputs[t]` is B × input; returns the B × hidden
    /// state after every step.
    pub fn forward(&self, inputs: &[Var<'t>], solver: SolverKind, dt: f64) -> Result<Vec<Var<'t>>> {
        if dt <= 0.0 {
            return Err(LtcError::InvalidStep(dt));
        }
        let Some(first) = inputs.first() else {
            return Ok(Vec::new());
        };
        let batch = first.shape()[0];
        let hidden = self.w_r.shape()[0];
        let tape = first.tape();
        let ctx = StepCtx {
            w_r: self.w_r,
            bias: self.b.expand_rows(batch)?,
            inv_tau: self.log_tau.neg().exp().expand_rows(batch)?,
            amp: self.amp.expand_rows(batch)?,
        };
        let mut x = tape.constant(Tensor::zeros(&[batch, hidden]));
        let mut states = Vec::with_capacity(inputs.len());
        for u in inputs {
            // input drive is constant across the step
            let drive = u.matmul(self.w_x)?.add(ctx.bias)?;
            x = match solver {
                SolverKind::Euler => x.add(ctx.derivative(x, drive)?.scale(dt))?,
                SolverKind::Rk4 => {
                    let k1 = ctx.derivative(x, drive)?;
                    let k2 = ctx.derivative(x.add(k1.scale(dt / 2.0))?, drive)?;
                    let k3 = ctx.derivative(x.add(k2.scale(dt / 2.0))?, drive)?;
                    let k4 = ctx.derivative(x.add(k3.scale(dt))?, drive)?;
                    let sum = k1.add(k2.scale(2.0))?.add(k3.scale(2.0))?.add(k4)?;
                    x.add(sum.scale(dt / 6.0))?
                }
                SolverKind::FusedExplicit => {
                    let f = ctx.activation(x, drive)?;
                    let dt_eff = x.row_l2_norm()?.add_scalar(1.0).recip().scale(dt).expand_cols(hidden)?;
                    let num = x.add(dt_eff.mul(f)?.mul(ctx.amp)?)?;
                    let den = dt_eff.mul(ctx.inv_tau.add(f)?)?.add_scalar(1.0);
                    if let Some(d) = den.with_value(|t| t.data().iter().copied().find(|&d| d <= MIN_DENOMINATOR)) {
                        return Err(LtcError::Numerical(format!("fused denominator {d:e}")));
                    }
                    num.div(den)?
                }
            };
            if !x.with_value(Tensor::is_finite) {
                return Err(LtcError::Numerical(format!("{} step produced a non-finite state", solver.name())));
            }
            states.push(x);
        }
        Ok(states)
    }
}

struct StepCtx<'t> {
    w_r: Var<'t>,
    bias: Var<'t>,
    inv_tau: Var<'t>,
    amp: Var<'t>,
}

impl<'t> StepCtx<'t> {
    /// `drive` already holds u·W_x + b.
    fn activation(&self, x: Var<'t>, drive: Var<'t>) -> Result<Var<'t>> {
        Ok(x.matmul(self.w_r)?.add(drive)?.tanh())
    }

    fn derivative(&self, x: Var<'t>, drive: Var<'t>) -> Result<Var<'t>> {
        Ok(self.activation(x, drive)?.sub(x)?.mul(self.inv_tau)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn derivative_examples() {
        let p = LtcParams::zeros(1, 1, 1.0);
        assert_eq!(derivative(&[0.0], &[0.3], &p).unwrap(), vec![0.0]);
        let p = LtcParams::zeros(1, 1, 2.0);
        assert!((derivative(&[1.0], &[0.0], &p).unwrap()[0] + 0.5).abs() < 1e-15);
        let mut p = LtcParams::zeros(1, 1, 2.0);
        p.b = Tensor::row(&[50.0]);
        assert!((derivative(&[0.25], &[0.0], &p).unwrap()[0] - 0.75 / 2.0).abs() < 1e-12);
        assert!(matches!(derivative(&[0.0, 1.0], &[0.0], &p), Err(LtcError::Shape(_))));
    }

    fn with_activation(f: f64, tau: f64) -> LtcParams {
        let mut p = LtcParams::zeros(1, 1, tau);
        p.b = Tensor::row(&[f.atanh()]);
        p
    }

    #[test]
    fn effective_tau_examples() {
        assert_eq!(effective_tau(&[0.0], &[0.0], &LtcParams::zeros(1, 1, 1.5)).unwrap(), vec![1.5]);
        let v = effective_tau(&[0.0], &[0.0], &with_activation(1.0 - 1e-15, 2.0)).unwrap()[0];
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
        let v = effective_tau(&[0.0], &[0.0], &with_activation(-0.5, 1.0)).unwrap()[0];
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fused_examples() {
        let p = with_activation(1.0 - 1e-15, 1.0);
        let x = step_fused(&[0.0], &[0.0], &p, 1.0).unwrap()[0];
        assert!((x - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(step_fused(&[0.0], &[0.0], &p, 0.0), Err(LtcError::InvalidStep(_))));
    }

    #[test]
    fn euler_first_step() {
        let p = LtcParams::zeros(1, 1, 1.0);
        let x = step_euler(&[1.0], &[0.0], &p, 0.1).unwrap()[0];
        assert!((x - 0.9).abs() < 1e-15);
    }

    #[test]
    fn rk4_first_step() {
        let p = LtcParams::zeros(1, 1, 1.0);
        let x = step_rk4(&[1.0], |_| vec![0.0], &p, 0.0, 0.1).unwrap()[0];
        assert!((x - (-0.1f64).exp()).abs() < 1e-7);
        assert!(step_rk4(&[1.0], |_| vec![0.0], &p, 0.0, 0.0).is_err());
    }

    #[test]
    fn graph_matches_numeric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LtcParams::init(4, 6, &mut rng);
        let windows: Vec<Tensor> = (0..3)
            .map(|_| {
                Tensor::matrix(5, 4, (0..20).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
            })
            .collect();
        for solver in SolverKind::ALL {
            let tape = Tape::new();
            let mut reg = ParamRegistry::new(&tape);
            let vars = LtcVars::register(&mut reg, "ltc", &p);
            let inputs: Vec<Var> = (0..5)
                .map(|t| {
                    let rows: Vec<Vec<f64>> = windows.iter().map(|w| w.row_slice(t).to_vec()).collect();
                    tape.constant(Tensor::from_rows(&rows).unwrap())
                })
                .collect();
            let states = vars.forward(&inputs, solver, 0.7).unwrap();
            for (b, w) in windows.iter().enumerate() {
                let reference = forward_sequence(w, &p, solver, 0.7).unwrap();
                for t in 0..5 {
                    let got = states[t].value();
                    for j in 0..6 {
                        assert!((got.get(b, j) - reference.get(t, j)).abs() < 1e-12, "{solver:?}");
                    }
                }
            }
        }
    }
}
