use super::{gemm, Result, Tensor, TensorError};
use std::cell::RefCell;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Unary {
    Tanh,
    Sigmoid,
    Relu,
    Softplus,
    Exp,
    Ln,
    Square,
    Sqrt,
    Recip,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Binary(Binary, usize, usize),
    Unary(Unary, usize),
    Scale(usize, f64),
    Offset(usize),
    Sum(usize),
    Mean(usize),
    Softmax(usize),
    LayerNorm { src: usize, inv_std: Vec<f64> },
    Concat { parts: Vec<usize>, axis: usize },
    Slice { src: usize, axis: usize, start: usize },
    Transpose(usize),
    ExpandRows(usize),
    ExpandCols(usize),
    SelectRows(Vec<(usize, usize)>),
    RowNorm(usize),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// Records operations in execution order; `backward` replays them in reverse.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    pub fn leaf(&self, value: Tensor, requires_grad: bool) -> Var<'_> {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// A trainable leaf.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, true)
    }

    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::scalar(value))
    }

    /// Accumulated gradient of a leaf, if any has been propagated to it.
    pub fn grad(&self, var: Var<'_>) -> Option<Tensor> {
        let nodes = self.nodes.borrow();
        let node = &nodes[var.id];
        node.grad.as_ref().map(|g| Tensor {
            shape: node.value.shape.clone(),
            data: g.clone(),
        })
    }

    pub fn zero_grad(&self) {
        for node in self.nodes.borrow_mut().iter_mut() {
            node.grad = None;
        }
    }

    /// Propagates d(loss)/d(leaf) into every trainable leaf, adding to any
    /// gradient already stored there.
    pub fn backward(&self, loss: Var<'_>) -> Result<()> {
        if !std::ptr::eq(loss.tape, self) {
            return Err(TensorError::ForeignTape);
        }
        let mut leaf_grads: Vec<(usize, Vec<f64>)> = Vec::new();
        {
            let nodes = self.nodes.borrow();
            if nodes[loss.id].value.numel() != 1 {
                return Err(TensorError::NotScalarLoss(nodes[loss.id].value.shape.clone()));
            }
            let mut grads: Vec<Option<Vec<f64>>> = (0..=loss.id).map(|_| None).collect();
            grads[loss.id] = Some(vec![1.0]);
            for id in (0..=loss.id).rev() {
                let Some(g) = grads[id].take() else { continue };
                let node = &nodes[id];
                if !node.requires_grad {
                    continue;
                }
                if let Op::Leaf = node.op {
                    leaf_grads.push((id, g));
                    continue;
                }
                propagate(&nodes, id, &g, &mut grads);
            }
        }
        let mut nodes = self.nodes.borrow_mut();
        for (id, g) in leaf_grads {
            match &mut nodes[id].grad {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }
}

fn grad_slot<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], id: usize) -> Option<&'a mut Vec<f64>> {
    if !nodes[id].requires_grad {
        return None;
    }
    Some(grads[id].get_or_insert_with(|| vec![0.0; nodes[id].value.numel()]))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn propagate(nodes: &[Node], id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let node = &nodes[id];
    let out = &node.value;
    match &node.op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
            let (m, k) = (av.shape[0], av.shape[1]);
            let n = bv.shape[1];
            if let Some(ga) = grad_slot(nodes, grads, *a) {
                gemm(g, (m, n), false, &bv.data, (k, n), true, ga, 1.0);
            }
            if let Some(gb) = grad_slot(nodes, grads, *b) {
                gemm(&av.data, (m, k), true, g, (m, n), false, gb, 1.0);
            }
        }
        Op::Binary(kind, a, b) => {
            let (av, bv) = (&nodes[*a].value.data, &nodes[*b].value.data);
            let n = g.len();
            let a_at = |i: usize| if av.len() == n { av[i] } else { av[0] };
            let b_at = |i: usize| if bv.len() == n { bv[i] } else { bv[0] };
            let da = |i: usize| match kind {
                Binary::Add | Binary::Sub => g[i],
                Binary::Mul => g[i] * b_at(i),
                Binary::Div => g[i] / b_at(i),
            };
            let db = |i: usize| match kind {
                Binary::Add => g[i],
                Binary::Sub => -g[i],
                Binary::Mul => g[i] * a_at(i),
                Binary::Div => -g[i] * a_at(i) / (b_at(i) * b_at(i)),
            };
            if let Some(ga) = grad_slot(nodes, grads, *a) {
                if ga.len() == n {
                    ga.iter_mut().enumerate().for_each(|(i, v)| *v += da(i));
                } else {
                    ga[0] += (0..n).map(da).sum::<f64>();
                }
            }
            if let Some(gb) = grad_slot(nodes, grads, *b) {
                if gb.len() == n {
                    gb.iter_mut().enumerate().for_each(|(i, v)| *v += db(i));
                } else {
                    gb[0] += (0..n).map(db).sum::<f64>();
                }
            }
        }
        Op::Unary(kind, src) => {
            let x = &nodes[*src].value.data;
            let y = &out.data;
            if let Some(gx) = grad_slot(nodes, grads, *src) {
                for i in 0..g.len() {
                    gx[i] += g[i]
                        * match kind {
                            Unary::Tanh => 1.0 - y[i] * y[i],
                            Unary::Sigmoid => y[i] * (1.0 - y[i]),
                            Unary::Relu => {
                                if x[i] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            Unary::Softplus => sigmoid(x[i]),
                            Unary::Exp => y[i],
                            Unary::Ln => 1.0 / x[i],
                            Unary::Square => 2.0 * x[i],
                            Unary::Sqrt => 0.5 / y[i],
                            Unary::Recip => -y[i] * y[i],
                        };
                }
            }
        }
        Op::Scale(src, c) => {
            if let Some(gx) = grad_slot(nodes, grads, *src) {
                gx.iter_mut().zip(g).for_each(|(v, gi)| *v += c * gi);
            }
        }
        Op::Offset(src) => {
            if let Some(gx) = grad_slot(nodes, grads, *src) {
                gx.iter_mut().zip(g).for_each(|(v, gi)| *v += gi);
            }
        }
        Op::Sum(src) => {
            if let Some(gx) = grad_slot(nodes, grads, *src) {
                gx.iter_mut().for_each(|v| *v += g[0]);
            }
        }
        Op::Mean(src) => {
            if let Some(gx) = grad_slot(nodes, grads, *src) {
                let k = g[0] / gx.len() as f64;
                gx.iter_mut().for_each(|v| *v += k);
            }
        }
        Op::Softmax(src) => {
            let (rows, cols) = (out.shape[0], out.shape[1]);
            if let Some(gx) = grad_slot(nodes, grads, *src) {
                for r in 0..rows {
                    let span = r * cols..(r + 1) * cols;
                    let (y, gr) = (&out.data[span.clone()], &g[span.clone()]);
                    let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for (c, v) in gx[span].iter_mut().enumerate() {
                        *v += y[c] * (gr[c] - dot);
                    }
                }
            }
        }
        Op::LayerNorm { src, inv_std } => {
            let (rows, cols) = (out.shape[0], out.shape[1]);
            if let Some(gx) = grad_slot(nodes, grads, *src) {
                let n = cols as f64;
                for r in 0..rows {
                    let span = r * cols..(r + 1) * cols;
                    let (y, gr) = (&out.data[span.clone()], &g[span.clone()]);
                    let mean_g = gr.iter().sum::<f64>() / n;
                    let mean_gy = y.iter().zip(gr).map(|(a, b)| a * b).sum::<f64>() / n;
                    for (c, v) in gx[span].iter_mut().enumerate() {
                        *v += inv_std[r] * (gr[c] - mean_g - y[c] * mean_gy);
                    }
                }
            }
        }
        Op::Concat { parts, axis } => {
            let out_cols = out.shape[1];
            let mut offset = 0;
            for &p in parts {
                let (pr, pc) = (nodes[p].value.shape[0], nodes[p].value.shape[1]);
                if let Some(gp) = grad_slot(nodes, grads, p) {
                    for r in 0..pr {
                        for c in 0..pc {
                            let (orow, ocol) = if *axis == 0 { (offset + r, c) } else { (r, offset + c) };
                            gp[r * pc + c] += g[orow * out_cols + ocol];
                        }
                    }
                }
                offset += if *axis == 0 { pr } else { pc };
            }
        }
        Op::Slice { src, axis, start } => {
            let (orows, ocols) = (out.shape[0], out.shape[1]);
            let scols = nodes[*src].value.shape[1];
            if let Some(gx) = grad_slot(nodes, grads, *src) {
                for r in 0..orows {
                    for c in 0..ocols {
                        let (sr, sc) = if *axis == 0 { (start + r, c) } else { (r, start + c) };
                        gx[sr * scols + sc] += g[r * ocols + c];
                    }
                }
            }
        }
        Op::Transpose(src) => {
            let (rows, cols) = (out.shape[0], out.shape[1]);
            if let Some(gx) = grad_slot(nodes, grads, *src) {
                for r in 0..rows {
                    for c in 0..cols {
                        gx[c * rows + r] += g[r * cols + c];
                    }
                }
            }
        }
        Op::ExpandRows(src) => {
            let (rows, cols) = (out.shape[0], out.shape[1]);
            if let Some(gx) = grad_slot(nodes, grads, *src) {
                for r in 0..rows {
                    for c in 0..cols {
                        gx[c] += g[r * cols + c];
                    }
                }
            }
        }
        Op::ExpandCols(src) => {
            let (rows, cols) = (out.shape[0], out.shape[1]);
            if let Some(gx) = grad_slot(nodes, grads, *src) {
                for r in 0..rows {
                    gx[r] += g[r * cols..(r + 1) * cols].iter().sum::<f64>();
                }
            }
        }
        Op::SelectRows(items) => {
            let cols = out.shape[1];
            for (i, &(src, row)) in items.iter().enumerate() {
                if let Some(gx) = grad_slot(nodes, grads, src) {
                    gx[row * cols..(row + 1) * cols]
                        .iter_mut()
                        .zip(&g[i * cols..(i + 1) * cols])
                        .for_each(|(v, gi)| *v += gi);
                }
            }
        }
        Op::RowNorm(src) => {
            let x = &nodes[*src].value;
            let cols = x.shape[1];
            if let Some(gx) = grad_slot(nodes, grads, *src) {
                for r in 0..x.shape[0] {
                    let norm = out.data[r];
                    // subgradient 0 at the origin
                    if norm > 0.0 {
                        for c in 0..cols {
                            gx[r * cols + c] += g[r] * x.data[r * cols + c] / norm;
                        }
                    }
                }
            }
        }
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Tensor {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape.clone()
    }

    pub fn item(&self) -> f64 {
        self.tape.nodes.borrow()[self.id].value.data[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    /// Runs `f` on the stored value without cloning it.
    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.tape.nodes.borrow()[self.id].value)
    }

    fn check_tape(&self, other: &Var<'_>) -> Result<()> {
        if std::ptr::eq(self.tape, other.tape) {
            Ok(())
        } else {
            Err(TensorError::ForeignTape)
        }
    }

    fn rg(&self) -> bool {
        self.requires_grad()
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.check_tape(&other)?;
        let nodes = self.tape.nodes.borrow();
        let (a, b) = (&nodes[self.id], &nodes[other.id]);
        let (m, k) = a.value.require_rank2("matmul")?;
        let (k2, n) = b.value.require_rank2("matmul")?;
        if k != k2 {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: a.value.shape.clone(),
                rhs: b.value.shape.clone(),
            });
        }
        let mut data = vec![0.0; m * n];
        gemm(&a.value.data, (m, k), false, &b.value.data, (k, n), false, &mut data, 0.0);
        let rg = a.requires_grad || b.requires_grad;
        drop(nodes);
        Ok(self.tape.push(
            Tensor {
                shape: vec![m, n],
                data,
            },
            Op::MatMul(self.id, other.id),
            rg,
        ))
    }

    fn binary(self, other: Var<'t>, kind: Binary, op: &'static str) -> Result<Var<'t>> {
        self.check_tape(&other)?;
        let nodes = self.tape.nodes.borrow();
        let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
        let f = |x: f64, y: f64| match kind {
            Binary::Add => x + y,
            Binary::Sub => x - y,
            Binary::Mul => x * y,
            Binary::Div => x / y,
        };
        let (shape, data): (Vec<usize>, Vec<f64>) = if a.shape == b.shape {
            (a.shape.clone(), a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect())
        } else if b.numel() == 1 {
            (a.shape.clone(), a.data.iter().map(|&x| f(x, b.data[0])).collect())
        } else if a.numel() == 1 {
            (b.shape.clone(), b.data.iter().map(|&y| f(a.data[0], y)).collect())
        } else {
            return Err(TensorError::ShapeMismatch {
                op,
                lhs: a.shape.clone(),
                rhs: b.shape.clone(),
            });
        };
        let rg = nodes[self.id].requires_grad || nodes[other.id].requires_grad;
        drop(nodes);
        Ok(self
            .tape
            .push(Tensor { shape, data }, Op::Binary(kind, self.id, other.id), rg))
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Binary::Add, "add")
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Binary::Sub, "sub")
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Binary::Mul, "mul")
    }

    pub fn div(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Binary::Div, "div")
    }

    fn unary(self, kind: Unary) -> Var<'t> {
        let f = |x: f64| match kind {
            Unary::Tanh => x.tanh(),
            Unary::Sigmoid => sigmoid(x),
            Unary::Relu => x.max(0.0),
            Unary::Softplus => softplus(x),
            Unary::Exp => x.exp(),
            Unary::Ln => x.ln(),
            Unary::Square => x * x,
            Unary::Sqrt => x.sqrt(),
            Unary::Recip => 1.0 / x,
        };
        let value = self.with_value(|t| t.map(f));
        self.tape.push(value, Op::Unary(kind, self.id), self.rg())
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(Unary::Tanh)
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(Unary::Sigmoid)
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(Unary::Relu)
    }

    /// `ln(1 + eˣ)`, evaluated as `max(x, 0) + ln(1 + e^{-|x|})`.
    pub fn softplus(self) -> Var<'t> {
        self.unary(Unary::Softplus)
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Unary::Exp)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(Unary::Ln)
    }

    pub fn square(self) -> Var<'t> {
        self.unary(Unary::Square)
    }

    pub fn sqrt(self) -> Var<'t> {
        self.unary(Unary::Sqrt)
    }

    pub fn recip(self) -> Var<'t> {
        self.unary(Unary::Recip)
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        let value = self.with_value(|t| t.map(|x| c * x));
        self.tape.push(value, Op::Scale(self.id, c), self.rg())
    }

    pub fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }

    pub fn add_scalar(self, c: f64) -> Var<'t> {
        let value = self.with_value(|t| t.map(|x| x + c));
        self.tape.push(value, Op::Offset(self.id), self.rg())
    }

    pub fn sum(self) -> Var<'t> {
        let s = self.with_value(|t| t.data.iter().sum());
        self.tape.push(Tensor::scalar(s), Op::Sum(self.id), self.rg())
    }

    pub fn mean(self) -> Var<'t> {
        let s = self.with_value(|t| t.data.iter().sum::<f64>() / t.numel() as f64);
        self.tape.push(Tensor::scalar(s), Op::Mean(self.id), self.rg())
    }

    pub fn rowwise_softmax(self) -> Result<Var<'t>> {
        let value = self.with_value(|t| -> Result<Tensor> {
            let (rows, cols) = t.require_rank2("rowwise_softmax")?;
            let mut data = t.data.clone();
            for r in 0..rows {
                let row = &mut data[r * cols..(r + 1) * cols];
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                row.iter_mut().for_each(|v| *v = (*v - max).exp());
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
            }
            Ok(Tensor {
                shape: t.shape.clone(),
                data,
            })
        })?;
        Ok(self.tape.push(value, Op::Softmax(self.id), self.rg()))
    }

    /// Normalizes each row to zero mean and unit variance (ε = 1e-5), no affine.
    pub fn layer_norm(self) -> Result<Var<'t>> {
        const EPS: f64 = 1e-5;
        let (value, inv_std) = self.with_value(|t| -> Result<(Tensor, Vec<f64>)> {
            let (rows, cols) = t.require_rank2("layer_norm")?;
            let mut data = t.data.clone();
            let mut inv = Vec::with_capacity(rows);
            for r in 0..rows {
                let row = &mut data[r * cols..(r + 1) * cols];
                let mean = row.iter().sum::<f64>() / cols as f64;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / cols as f64;
                let k = 1.0 / (var + EPS).sqrt();
                row.iter_mut().for_each(|v| *v = (*v - mean) * k);
                inv.push(k);
            }
            Ok((
                Tensor {
                    shape: t.shape.clone(),
                    data,
                },
                inv,
            ))
        })?;
        Ok(self.tape.push(value, Op::LayerNorm { src: self.id, inv_std }, self.rg()))
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        let value = self.with_value(|t| -> Result<Tensor> {
            let (rows, cols) = t.require_rank2("transpose")?;
            let mut data = vec![0.0; rows * cols];
            for r in 0..rows {
                for c in 0..cols {
                    data[c * rows + r] = t.data[r * cols + c];
                }
            }
            Ok(Tensor {
                shape: vec![cols, rows],
                data,
            })
        })?;
        Ok(self.tape.push(value, Op::Transpose(self.id), self.rg()))
    }

    /// Rows `start..end` (axis 0) or columns `start..end` (axis 1).
    pub fn slice(self, axis: usize, start: usize, end: usize) -> Result<Var<'t>> {
        let value = self.with_value(|t| -> Result<Tensor> {
            let (rows, cols) = t.require_rank2("slice")?;
            let limit = if axis == 0 { rows } else { cols };
            if axis > 1 || start > end || end > limit {
                return Err(TensorError::ShapeMismatch {
                    op: "slice",
                    lhs: t.shape.clone(),
                    rhs: vec![axis, start, end],
                });
            }
            let (orows, ocols) = if axis == 0 { (end - start, cols) } else { (rows, end - start) };
            let mut data = Vec::with_capacity(orows * ocols);
            for r in 0..orows {
                let (sr, sc) = if axis == 0 { (start + r, 0) } else { (r, start) };
                data.extend_from_slice(&t.data[sr * cols + sc..sr * cols + sc + ocols]);
            }
            Ok(Tensor {
                shape: vec![orows, ocols],
                data,
            })
        })?;
        Ok(self.tape.push(value, Op::Slice { src: self.id, axis, start }, self.rg()))
    }

    /// Repeats a `1 × c` row `n` times.
    pub fn expand_rows(self, n: usize) -> Result<Var<'t>> {
        let value = self.with_value(|t| -> Result<Tensor> {
            let (rows, cols) = t.require_rank2("expand_rows")?;
            if rows != 1 {
                return Err(TensorError::ShapeMismatch {
                    op: "expand_rows",
                    lhs: t.shape.clone(),
                    rhs: vec![1, cols],
                });
            }
            Ok(Tensor {
                shape: vec![n, cols],
                data: t.data.repeat(n),
            })
        })?;
        Ok(self.tape.push(value, Op::ExpandRows(self.id), self.rg()))
    }

    /// Repeats an `r × 1` column `c` times.
    pub fn expand_cols(self, c: usize) -> Result<Var<'t>> {
        let value = self.with_value(|t| -> Result<Tensor> {
            let (rows, cols) = t.require_rank2("expand_cols")?;
            if cols != 1 {
                return Err(TensorError::ShapeMismatch {
                    op: "expand_cols",
                    lhs: t.shape.clone(),
                    rhs: vec![rows, 1],
                });
            }
            Ok(Tensor {
                shape: vec![rows, c],
                data: t.data.iter().flat_map(|&v| std::iter::repeat(v).take(c)).collect(),
            })
        })?;
        Ok(self.tape.push(value, Op::ExpandCols(self.id), self.rg()))
    }

    /// Euclidean norm of each row, as an `r × 1` column.
    pub fn row_l2_norm(self) -> Result<Var<'t>> {
        let value = self.with_value(|t| -> Result<Tensor> {
            let (rows, cols) = t.require_rank2("row_l2_norm")?;
            Ok(Tensor {
                shape: vec![rows, 1],
                data: (0..rows)
                    .map(|r| t.data[r * cols..(r + 1) * cols].iter().map(|v| v * v).sum::<f64>().sqrt())
                    .collect(),
            })
        })?;
        Ok(self.tape.push(value, Op::RowNorm(self.id), self.rg()))
    }

    /// Concatenates rank-2 tensors along rows (axis 0) or columns (axis 1).
    pub fn concat(parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        let first = parts.first().ok_or(TensorError::ShapeMismatch {
            op: "concat",
            lhs: vec![],
            rhs: vec![],
        })?;
        let tape = first.tape;
        let nodes = tape.nodes.borrow();
        let (r0, c0) = nodes[first.id].value.require_rank2("concat")?;
        let mut total = 0;
        for p in parts {
            first.check_tape(p)?;
            let (r, c) = nodes[p.id].value.require_rank2("concat")?;
            let ok = if axis == 0 { c == c0 } else { r == r0 };
            if !ok || axis > 1 {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: vec![r0, c0],
                    rhs: vec![r, c],
                });
            }
            total += if axis == 0 { r } else { c };
        }
        let (rows, cols) = if axis == 0 { (total, c0) } else { (r0, total) };
        let mut data = vec![0.0; rows * cols];
        let mut offset = 0;
        for p in parts {
            let v = &nodes[p.id].value;
            let (pr, pc) = (v.shape[0], v.shape[1]);
            for r in 0..pr {
                let (orow, ocol) = if axis == 0 { (offset + r, 0) } else { (r, offset) };
                data[orow * cols + ocol..orow * cols + ocol + pc].copy_from_slice(&v.data[r * pc..(r + 1) * pc]);
            }
            offset += if axis == 0 { pr } else { pc };
        }
        let rg = parts.iter().any(|p| nodes[p.id].requires_grad);
        drop(nodes);
        Ok(tape.push(
            Tensor {
                shape: vec![rows, cols],
                data,
            },
            Op::Concat {
                parts: parts.iter().map(|p| p.id).collect(),
                axis,
            },
            rg,
        ))
    }

    /// Stacks the chosen row of each source into a new `k × c` matrix.
    pub fn select_rows(items: &[(Var<'t>, usize)]) -> Result<Var<'t>> {
        let (first, _) = items.first().ok_or(TensorError::ShapeMismatch {
            op: "select_rows",
            lhs: vec![],
            rhs: vec![],
        })?;
        let tape = first.tape;
        let nodes = tape.nodes.borrow();
        let (_, cols) = nodes[first.id].value.require_rank2("select_rows")?;
        let mut data = Vec::with_capacity(items.len() * cols);
        for (v, row) in items {
            first.check_tape(v)?;
            let t = &nodes[v.id].value;
            let (r, c) = t.require_rank2("select_rows")?;
            if c != cols || *row >= r {
                return Err(TensorError::ShapeMismatch {
                    op: "select_rows",
                    lhs: vec![r, c],
                    rhs: vec![*row, cols],
                });
            }
            data.extend_from_slice(&t.data[row * cols..(row + 1) * cols]);
        }
        let rg = items.iter().any(|(v, _)| nodes[v.id].requires_grad);
        drop(nodes);
        Ok(tape.push(
            Tensor {
                shape: vec![items.len(), cols],
                data,
            },
            Op::SelectRows(items.iter().map(|(v, r)| (v.id, *r)).collect()),
            rg,
        ))
    }
}

/// Named trainable leaves attached to one tape.
#[derive(Debug)]
pub struct ParamRegistry<'t> {
    tape: &'t Tape,
    entries: Vec<(String, Var<'t>)>,
}

impl<'t> ParamRegistry<'t> {
    pub fn new(tape: &'t Tape) -> Self {
        Self {
            tape,
            entries: Vec::new(),
        }
    }

    pub fn param(&mut self, name: impl Into<String>, value: &Tensor) -> Var<'t> {
        let v = self.tape.param(value.clone());
        self.entries.push((name.into(), v));
        v
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn entries(&self) -> &[(String, Var<'t>)] {
        &self.entries
    }

    /// Gradient of every registered parameter (zeros where none flowed).
    pub fn gradients(&self) -> Vec<(String, Tensor)> {
        self.entries
            .iter()
            .map(|(name, v)| {
                let g = self
                    .tape
                    .grad(*v)
                    .unwrap_or_else(|| Tensor::zeros(&v.shape()));
                (name.clone(), g)
            })
            .collect()
    }
}
