use std::ops::Range;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Forward primitives. Shape rules:
///
/// * `Add`, `Mul`: two inputs of identical shape, elementwise.
/// * `MatMul`: `(m, k) x (k, n) -> (m, n)`.
/// * `EmbeddingLookup`: table `(V, d)`, every id `< V` -> `(ids.len(), d)`.
/// * `Softmax`, `LogSoftmax`: normalize along the last axis.
/// * `LayerNorm`: `x (.., d)`, gain `(d)`, bias `(d)`; normalizes the last axis.
/// * `Relu`, `Scale`: any shape.
/// * `Concat`: axis 0 joins along the leading dimension (trailing dims equal);
///   axis 1 joins matrices with equal row counts.
/// * `Slice`: sub-block of a matrix, both ranges non-empty.
/// * `Sum`, `Mean`: reduce everything to a scalar.
/// * `Transpose`: matrix transpose.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Add,
    Mul,
    MatMul,
    EmbeddingLookup {
        ids: Vec<usize>,
    },
    Softmax,
    LogSoftmax,
    LayerNorm {
        eps: f64,
    },
    Relu,
    Scale(f64),
    Concat {
        axis: usize,
    },
    Slice {
        rows: Range<usize>,
        cols: Range<usize>,
    },
    Sum,
    Mean,
    Transpose,
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Mul => "mul",
            Op::MatMul => "matmul",
            Op::EmbeddingLookup { .. } => "embedding_lookup",
            Op::Softmax => "softmax",
            Op::LogSoftmax => "log_softmax",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Relu => "relu",
            Op::Scale(_) => "scale",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Sum => "sum",
            Op::Mean => "mean",
            Op::Transpose => "transpose",
        }
    }
}

#[derive(Debug)]
enum Origin {
    Leaf,
    Op(Op),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    origin: Origin,
    inputs: Vec<usize>,
    requires_grad: bool,
    /// Layer norm keeps per-row inverse std followed by the normalized input.
    saved: Vec<f64>,
}

/// Define-by-run record of a computation. Build one per training step.
#[derive(Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    grad_enabled: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    /// A tape that never tracks gradients; used for inference passes.
    pub fn no_grad() -> Self {
        Tape {
            nodes: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    /// Trainable input. Tracks gradients unless the tape is `no_grad`.
    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        let track = self.grad_enabled;
        self.push_leaf(value, track)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: "leaf" });
        }
        self.nodes.push(Node {
            value,
            origin: Origin::Leaf,
            inputs: Vec::new(),
            requires_grad,
            saved: Vec::new(),
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn check(&self, v: Var, op: &'static str) -> Result<&Tensor> {
        self.nodes
            .get(v.0)
            .map(|n| &n.value)
            .ok_or_else(|| Error::shape(op, format!("node {} is not on this tape", v.0)))
    }

    /// Applies `op` to `inputs`, recording it for the backward pass.
    pub fn apply(&mut self, op: Op, inputs: &[Var]) -> Result<Var> {
        let name = op.name();
        let vals = inputs
            .iter()
            .map(|&v| self.check(v, name))
            .collect::<Result<Vec<_>>>()?;
        let arity_ok = match op {
            Op::Add | Op::Mul | Op::MatMul => vals.len() == 2,
            Op::LayerNorm { .. } => vals.len() == 3,
            Op::Concat { .. } => !vals.is_empty(),
            _ => vals.len() == 1,
        };
        if !arity_ok {
            return Err(Error::shape(
                name,
                format!("wrong number of inputs: {}", vals.len()),
            ));
        }
        let (value, saved) = forward(&op, &vals)?;
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let requires_grad =
            self.grad_enabled && inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            origin: Origin::Op(op),
            inputs: inputs.iter().map(|v| v.0).collect(),
            requires_grad,
            saved: if requires_grad { saved } else { Vec::new() },
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::Add, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::Mul, &[a, b])
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.apply(Op::MatMul, &[a, b])
    }

    pub fn embedding_lookup(&mut self, table: Var, ids: Vec<usize>) -> Result<Var> {
        self.apply(Op::EmbeddingLookup { ids }, &[table])
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        self.apply(Op::Softmax, &[x])
    }

    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        self.apply(Op::LogSoftmax, &[x])
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        self.apply(Op::LayerNorm { eps: 1e-5 }, &[x, gain, bias])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.apply(Op::Relu, &[x])
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.apply(Op::Scale(c), &[x])
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        self.apply(Op::Concat { axis }, xs)
    }

    pub fn slice(&mut self, x: Var, rows: Range<usize>, cols: Range<usize>) -> Result<Var> {
        self.apply(Op::Slice { rows, cols }, &[x])
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.apply(Op::Sum, &[x])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        self.apply(Op::Mean, &[x])
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        self.apply(Op::Transpose, &[x])
    }

    /// Reverse pass from a scalar `loss`. Gradients of every node reachable
    /// from `loss` accumulate over all consuming paths.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let node = self
            .nodes
            .get(loss.0)
            .ok_or_else(|| Error::Backward(format!("node {} is not on this tape", loss.0)))?;
        if !node.value.is_scalar() {
            return Err(Error::Backward(format!(
                "loss must be scalar, got shape {:?}",
                node.value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if node.requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Origin::Op(op) = &node.origin else {
                continue;
            };
            let Some(g) = grads[id].take() else {
                continue;
            };
            self.backprop(op, node, &g, &mut grads);
            grads[id] = Some(g);
        }
        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| g.map(|d| Tensor::from_parts(n.value.shape().to_vec(), d)))
            .collect();
        Ok(Gradients { grads })
    }

    fn backprop(&self, op: &Op, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let ins = &node.inputs;
        let input = |i: usize| &self.nodes[ins[i]];
        let wants = |i: usize| self.nodes[ins[i]].requires_grad;
        match op {
            Op::Add => {
                for i in 0..2 {
                    if wants(i) {
                        axpy(acc(grads, ins[i], g.len()), 1.0, g);
                    }
                }
            }
            Op::Mul => {
                for (i, other) in [(0, 1), (1, 0)] {
                    if wants(i) {
                        let o = input(other).value.data();
                        let dst = acc(grads, ins[i], g.len());
                        for ((d, &gv), &ov) in dst.iter_mut().zip(g).zip(o) {
                            *d += gv * ov;
                        }
                    }
                }
            }
            Op::MatMul => {
                let a = &input(0).value;
                let b = &input(1).value;
                let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                if wants(0) {
                    // dA += dC B^T
                    let dst = acc(grads, ins[0], m * k);
                    gemm(m, n, k, g, false, b.data(), true, dst, 1.0);
                }
                if wants(1) {
                    // dB += A^T dC
                    let dst = acc(grads, ins[1], k * n);
                    gemm(k, m, n, a.data(), true, g, false, dst, 1.0);
                }
            }
            Op::EmbeddingLookup { ids } => {
                if wants(0) {
                    let table = &input(0).value;
                    let d = table.last_dim();
                    let dst = acc(grads, ins[0], table.numel());
                    for (r, &id) in ids.iter().enumerate() {
                        axpy(&mut dst[id * d..(id + 1) * d], 1.0, &g[r * d..(r + 1) * d]);
                    }
                }
            }
            Op::Softmax => {
                if wants(0) {
                    let y = &node.value;
                    let d = y.last_dim();
                    let dst = acc(grads, ins[0], g.len());
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = &g[r * d..(r + 1) * d];
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for j in 0..d {
                            dst[r * d + j] += yr[j] * (gr[j] - dot);
                        }
                    }
                }
            }
            Op::LogSoftmax => {
                if wants(0) {
                    let y = &node.value;
                    let d = y.last_dim();
                    let dst = acc(grads, ins[0], g.len());
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = &g[r * d..(r + 1) * d];
                        let total: f64 = gr.iter().sum();
                        for j in 0..d {
                            dst[r * d + j] += gr[j] - yr[j].exp() * total;
                        }
                    }
                }
            }
            Op::LayerNorm { .. } => {
                let x = &input(0).value;
                let gain = input(1).value.data();
                let d = x.last_dim();
                let rows = x.rows();
                let (rstd, xhat) = node.saved.split_at(rows);
                if wants(0) {
                    let dst = acc(grads, ins[0], x.numel());
                    let mut dxhat = vec![0.0; d];
                    for r in 0..rows {
                        let gr = &g[r * d..(r + 1) * d];
                        let xr = &xhat[r * d..(r + 1) * d];
                        let mut mean_dxhat = 0.0;
                        let mut mean_dxhat_xhat = 0.0;
                        for j in 0..d {
                            dxhat[j] = gr[j] * gain[j];
                            mean_dxhat += dxhat[j];
                            mean_dxhat_xhat += dxhat[j] * xr[j];
                        }
                        mean_dxhat /= d as f64;
                        mean_dxhat_xhat /= d as f64;
                        for j in 0..d {
                            dst[r * d + j] +=
                                rstd[r] * (dxhat[j] - mean_dxhat - xr[j] * mean_dxhat_xhat);
                        }
                    }
                }
                if wants(1) {
                    let dst = acc(grads, ins[1], d);
                    for r in 0..rows {
                        for j in 0..d {
                            dst[j] += g[r * d + j] * xhat[r * d + j];
                        }
                    }
                }
                if wants(2) {
                    let dst = acc(grads, ins[2], d);
                    for r in 0..rows {
                        axpy(dst, 1.0, &g[r * d..(r + 1) * d]);
                    }
                }
            }
            Op::Relu => {
                if wants(0) {
                    let x = input(0).value.data();
                    let dst = acc(grads, ins[0], g.len());
                    for ((d, &gv), &xv) in dst.iter_mut().zip(g).zip(x) {
                        if xv > 0.0 {
                            *d += gv;
                        }
                    }
                }
            }
            Op::Scale(c) => {
                if wants(0) {
                    axpy(acc(grads, ins[0], g.len()), *c, g);
                }
            }
            Op::Concat { axis } => {
                let out_cols = node.value.last_dim();
                let mut offset = 0;
                for i in 0..ins.len() {
                    let part = &input(i).value;
                    let len = part.numel();
                    let cols = part.last_dim();
                    if wants(i) {
                        let dst = acc(grads, ins[i], len);
                        if *axis == 0 {
                            axpy(dst, 1.0, &g[offset..offset + len]);
                        } else {
                            for r in 0..part.rows() {
                                let src = &g[r * out_cols + offset..r * out_cols + offset + cols];
                                axpy(&mut dst[r * cols..(r + 1) * cols], 1.0, src);
                            }
                        }
                    }
                    offset += if *axis == 0 { len } else { cols };
                }
            }
            Op::Slice { rows, cols } => {
                if wants(0) {
                    let x = &input(0).value;
                    let xc = x.last_dim();
                    let w = cols.len();
                    let dst = acc(grads, ins[0], x.numel());
                    for (k, r) in rows.clone().enumerate() {
                        let base = r * xc + cols.start;
                        axpy(&mut dst[base..base + w], 1.0, &g[k * w..(k + 1) * w]);
                    }
                }
            }
            Op::Sum | Op::Mean => {
                if wants(0) {
                    let n = input(0).value.numel();
                    let v = if matches!(op, Op::Mean) {
                        g[0] / n as f64
                    } else {
                        g[0]
                    };
                    for d in acc(grads, ins[0], n) {
                        *d += v;
                    }
                }
            }
            Op::Transpose => {
                if wants(0) {
                    let x = &input(0).value;
                    let (r, c) = (x.shape()[0], x.shape()[1]);
                    let dst = acc(grads, ins[0], r * c);
                    for i in 0..r {
                        for j in 0..c {
                            dst[i * c + j] += g[j * r + i];
                        }
                    }
                }
            }
        }
    }
}

/// Gradients from one backward pass, indexed by tape node.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of `v`, or `None` when `v` was not reached from the loss.
    pub fn get_ref(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`; zeros of the node's shape when unreachable.
    pub fn get(&self, tape: &Tape, v: Var) -> Tensor {
        self.get_ref(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(tape.value(v).shape()))
    }

    /// Every node that received a gradient.
    pub fn iter(&self) -> impl Iterator<Item = (Var, &Tensor)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (Var(i), g)))
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], id: usize, len: usize) -> &mut [f64] {
    grads[id].get_or_insert_with(|| vec![0.0; len])
}

fn axpy(dst: &mut [f64], a: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

/// `c = a_op(a) * b_op(b) + beta * c` for logical shapes `(m, k) x (k, n)`.
/// A transposed operand is stored in its untransposed layout.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    beta: f64,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if b_t {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    // SAFETY: slice lengths match the logical shapes and strides above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

fn matrix(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        &[r, c] => Ok((r, c)),
        s => Err(Error::shape(
            op,
            format!("expected a matrix, got shape {s:?}"),
        )),
    }
}

fn forward(op: &Op, x: &[&Tensor]) -> Result<(Tensor, Vec<f64>)> {
    let name = op.name();
    let out = match op {
        Op::Add | Op::Mul => {
            same_shape(name, x[0], x[1])?;
            let f = if matches!(op, Op::Add) {
                |a: f64, b: f64| a + b
            } else {
                |a: f64, b: f64| a * b
            };
            let data = x[0]
                .data()
                .iter()
                .zip(x[1].data())
                .map(|(&a, &b)| f(a, b))
                .collect();
            Tensor::from_parts(x[0].shape().to_vec(), data)
        }
        Op::MatMul => {
            let (m, k) = matrix(name, x[0])?;
            let (k2, n) = matrix(name, x[1])?;
            if k != k2 {
                return Err(Error::shape(
                    name,
                    format!("inner dimensions differ: ({m}, {k}) x ({k2}, {n})"),
                ));
            }
            let mut c = vec![0.0; m * n];
            gemm(m, k, n, x[0].data(), false, x[1].data(), false, &mut c, 0.0);
            Tensor::from_parts(vec![m, n], c)
        }
        Op::EmbeddingLookup { ids } => {
            let (v, d) = matrix(name, x[0])?;
            if ids.is_empty() {
                return Err(Error::shape(name, "no ids"));
            }
            let mut data = Vec::with_capacity(ids.len() * d);
            for &id in ids {
                if id >= v {
                    return Err(Error::shape(
                        name,
                        format!("id {id} out of range for table with {v} rows"),
                    ));
                }
                data.extend_from_slice(x[0].row(id));
            }
            Tensor::from_parts(vec![ids.len(), d], data)
        }
        Op::Softmax | Op::LogSoftmax => {
            let t = x[0];
            if t.rank() == 0 {
                return Err(Error::shape(name, "needs at least one axis"));
            }
            let d = t.last_dim();
            let mut data = Vec::with_capacity(t.numel());
            for r in 0..t.rows() {
                let row = t.row(r);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
                if matches!(op, Op::Softmax) {
                    data.extend(row.iter().map(|v| (v - max).exp() / z));
                } else {
                    let lse = max + z.ln();
                    data.extend(row.iter().map(|v| v - lse));
                }
            }
            debug_assert_eq!(data.len(), t.rows() * d);
            Tensor::from_parts(t.shape().to_vec(), data)
        }
        Op::LayerNorm { eps } => {
            let t = x[0];
            if t.rank() == 0 {
                return Err(Error::shape(name, "needs at least one axis"));
            }
            let d = t.last_dim();
            if x[1].shape() != [d] || x[2].shape() != [d] {
                return Err(Error::shape(
                    name,
                    format!(
                        "gain {:?} and bias {:?} must both be [{d}]",
                        x[1].shape(),
                        x[2].shape()
                    ),
                ));
            }
            let rows = t.rows();
            let (gain, bias) = (x[1].data(), x[2].data());
            let mut saved = vec![0.0; rows + rows * d];
            let mut data = Vec::with_capacity(t.numel());
            for r in 0..rows {
                let row = t.row(r);
                let mean = row.iter().sum::<f64>() / d as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                let rstd = 1.0 / (var + eps).sqrt();
                saved[r] = rstd;
                for j in 0..d {
                    let xh = (row[j] - mean) * rstd;
                    saved[rows + r * d + j] = xh;
                    data.push(xh * gain[j] + bias[j]);
                }
            }
            return Ok((Tensor::from_parts(t.shape().to_vec(), data), saved));
        }
        Op::Relu => x[0].map(|v| v.max(0.0)),
        Op::Scale(c) => {
            let c = *c;
            x[0].map(|v| v * c)
        }
        Op::Concat { axis } => concat_forward(name, x, *axis)?,
        Op::Slice { rows, cols } => {
            let (r, c) = matrix(name, x[0])?;
            if rows.is_empty() || cols.is_empty() || rows.end > r || cols.end > c {
                return Err(Error::shape(
                    name,
                    format!("ranges {rows:?} x {cols:?} invalid for ({r}, {c})"),
                ));
            }
            let mut data = Vec::with_capacity(rows.len() * cols.len());
            for i in rows.clone() {
                data.extend_from_slice(&x[0].row(i)[cols.clone()]);
            }
            Tensor::from_parts(vec![rows.len(), cols.len()], data)
        }
        Op::Sum => Tensor::scalar(x[0].data().iter().sum()),
        Op::Mean => Tensor::scalar(x[0].data().iter().sum::<f64>() / x[0].numel() as f64),
        Op::Transpose => {
            let (r, c) = matrix(name, x[0])?;
            let src = x[0].data();
            let mut data = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    data[j * r + i] = src[i * c + j];
                }
            }
            Tensor::from_parts(vec![c, r], data)
        }
    };
    Ok((out, Vec::new()))
}

fn concat_forward(name: &'static str, x: &[&Tensor], axis: usize) -> Result<Tensor> {
    match axis {
        0 => {
            let trailing = &x[0].shape()[1..];
            if x[0].rank() == 0 {
                return Err(Error::shape(name, "cannot concatenate scalars"));
            }
            let mut lead = 0;
            let mut data = Vec::with_capacity(x.iter().map(|t| t.numel()).sum());
            for t in x {
                if t.rank() == 0 || &t.shape()[1..] != trailing {
                    return Err(Error::shape(
                        name,
                        format!("trailing dims {:?} vs {:?}", t.shape(), x[0].shape()),
                    ));
                }
                lead += t.shape()[0];
                data.extend_from_slice(t.data());
            }
            let mut shape = vec![lead];
            shape.extend_from_slice(trailing);
            Ok(Tensor::from_parts(shape, data))
        }
        1 => {
            let (rows, _) = matrix(name, x[0])?;
            let mut total = 0;
            for t in x {
                let (r, c) = matrix(name, t)?;
                if r != rows {
                    return Err(Error::shape(
                        name,
                        format!("row counts differ: {r} vs {rows}"),
                    ));
                }
                total += c;
            }
            let mut data = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for t in x {
                    data.extend_from_slice(t.row(r));
                }
            }
            Ok(Tensor::from_parts(vec![rows, total], data))
        }
        a => Err(Error::shape(name, format!("unsupported axis {a}"))),
    }
}
