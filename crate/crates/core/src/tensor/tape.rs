//! Reverse-mode differentiation over a linear tape.
//!
//! Nodes are appended in evaluation order, so a node's inputs always have
//! smaller ids and a reverse sweep over ids is a valid topological order.

use std::cell::RefCell;

use super::dense::Tensor;
use crate::error::{Error, Result};

/// Floor applied inside [`Var::ln`].
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Transpose(usize),
    ConcatCols(Vec<usize>),
    RowMean(usize),
    SoftmaxRows(usize),
    Relu(usize),
    Sigmoid(usize),
    Ln(usize),
    Sum(usize),
    GatherRows(usize, Vec<usize>),
    // Normalized output is the node value; keep per-row 1/sigma.
    LayerNormRows(usize, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Tensor>,
}

/// Records one forward evaluation. A new tape is normally built per
/// optimizer step; gradients accumulate across repeated `backward` calls
/// until [`Tape::zero_grad`].
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var({}, {:?})", self.id, self.shape())
    }
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

    /// A trainable input.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn leaf(&self, value: Tensor, requires_grad: bool) -> Var<'_> {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn zero_grad(&self) {
        for node in self.nodes.borrow_mut().iter_mut() {
            node.grad = None;
        }
    }

    pub fn grad(&self, var: Var<'_>) -> Option<Tensor> {
        self.nodes.borrow()[var.id].grad.clone()
    }

    /// Accumulates d(loss)/d(node) into every node that requires a gradient.
    pub fn backward(&self, loss: Var<'_>) -> Result<()> {
        let mut nodes = self.nodes.borrow_mut();
        let root = &nodes[loss.id];
        if root.value.numel() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got shape {:?}", root.value.shape()),
            ));
        }
        if !root.requires_grad {
            return Ok(());
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; loss.id + 1];
        adj[loss.id] = Some(Tensor::full(root.value.shape(), 1.0));

        for id in (0..=loss.id).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &nodes[id];
            for (input, contribution) in local_grads(&nodes, node, &g) {
                if !nodes[input].requires_grad {
                    continue;
                }
                match &mut adj[input] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot => *slot = Some(contribution),
                }
            }
            let node = &mut nodes[id];
            match &mut node.grad {
                Some(acc) => acc.add_assign(&g),
                slot => *slot = Some(g),
            }
        }
        Ok(())
    }
}

fn colsum(t: &Tensor) -> Tensor {
    t.column_sums()
}

fn local_grads(nodes: &[Node], node: &Node, g: &Tensor) -> Vec<(usize, Tensor)> {
    let val = |i: usize| &nodes[i].value;
    let wants = |i: usize| nodes[i].requires_grad;
    match &node.op {
        Op::Leaf => vec![],
        Op::MatMul(a, b) => {
            let mut out = Vec::with_capacity(2);
            if wants(*a) {
                out.push((*a, g.matmul(&val(*b).transpose().unwrap()).unwrap()));
            }
            if wants(*b) {
                out.push((*b, val(*a).transpose().unwrap().matmul(g).unwrap()));
            }
            out
        }
        Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
        Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.map(|x| -x))],
        Op::Mul(a, b) => vec![
            (*a, g.zip_map(val(*b), |gi, bi| gi * bi)),
            (*b, g.zip_map(val(*a), |gi, ai| gi * ai)),
        ],
        Op::AddRow(a, row) => vec![(*a, g.clone()), (*row, colsum(g))],
        Op::MulRow(a, row) => {
            let x = val(*a);
            let r = val(*row);
            let c = x.cols();
            let mut dx = g.clone();
            for (k, v) in dx.data_mut().iter_mut().enumerate() {
                *v *= r.data()[k % c];
            }
            vec![(*a, dx), (*row, colsum(&g.zip_map(x, |gi, xi| gi * xi)))]
        }
        Op::Scale(a, k) => vec![(*a, g.map(|x| x * k))],
        Op::AddScalar(a) => vec![(*a, g.clone())],
        Op::Transpose(a) => vec![(*a, g.transpose().unwrap())],
        Op::ConcatCols(parts) => {
            let rows = g.rows();
            let total = g.cols();
            let mut offset = 0;
            parts
                .iter()
                .map(|&p| {
                    let w = val(p).cols();
                    let mut d = Vec::with_capacity(rows * w);
                    for i in 0..rows {
                        d.extend_from_slice(&g.data()[i * total + offset..i * total + offset + w]);
                    }
                    offset += w;
                    (p, Tensor::matrix(rows, w, d).unwrap())
                })
                .collect()
        }
        Op::RowMean(a) => {
            let x = val(*a);
            let (r, c) = (x.rows(), x.cols());
            let mut d = Vec::with_capacity(r * c);
            for _ in 0..r {
                d.extend(g.data().iter().map(|v| v / r as f64));
            }
            vec![(*a, Tensor::matrix(r, c, d).unwrap())]
        }
        Op::SoftmaxRows(a) => {
            let y = &node.value;
            let c = y.cols();
            let mut d = vec![0.0; y.numel()];
            for i in 0..y.rows() {
                let yr = &y.data()[i * c..(i + 1) * c];
                let gr = &g.data()[i * c..(i + 1) * c];
                let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                for j in 0..c {
                    d[i * c + j] = yr[j] * (gr[j] - dot);
                }
            }
            vec![(*a, Tensor::matrix(y.rows(), c, d).unwrap())]
        }
        Op::Relu(a) => vec![(*a, g.zip_map(val(*a), |gi, xi| if xi > 0.0 { gi } else { 0.0 }))],
        Op::Sigmoid(a) => vec![(*a, g.zip_map(&node.value, |gi, y| gi * y * (1.0 - y)))],
        Op::Ln(a) => vec![(*a, g.zip_map(val(*a), |gi, xi| if xi > LOG_CLAMP { gi / xi } else { 0.0 }))],
        Op::Sum(a) => vec![(*a, Tensor::full(val(*a).shape(), g.item()))],
        Op::GatherRows(a, idx) => {
            let x = val(*a);
            let c = x.cols();
            let mut d = Tensor::zeros(x.shape());
            for (k, &r) in idx.iter().enumerate() {
                for j in 0..c {
                    d.data_mut()[r * c + j] += g.data()[k * c + j];
                }
            }
            vec![(*a, d)]
        }
        Op::LayerNormRows(a, inv_sigma) => {
            let xhat = &node.value;
            let c = xhat.cols();
            let n = c as f64;
            let mut d = vec![0.0; xhat.numel()];
            for i in 0..xhat.rows() {
                let xr = &xhat.data()[i * c..(i + 1) * c];
                let gr = &g.data()[i * c..(i + 1) * c];
                let mean_g = gr.iter().sum::<f64>() / n;
                let mean_gx = gr.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>() / n;
                for j in 0..c {
                    d[i * c + j] = inv_sigma[i] * (gr[j] - mean_g - xr[j] * mean_gx);
                }
            }
            vec![(*a, Tensor::matrix(xhat.rows(), c, d).unwrap())]
        }
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())))
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Tensor {
        self.tape.nodes.borrow()[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn item(&self) -> f64 {
        self.tape.nodes.borrow()[self.id].value.item()
    }

    pub fn grad(&self) -> Option<Tensor> {
        self.tape.grad(*self)
    }

    fn unary(&self, op: Op, f: impl FnOnce(&Tensor) -> Result<Tensor>) -> Result<Var<'t>> {
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let n = &nodes[self.id];
            (f(&n.value)?, n.requires_grad)
        };
        Ok(self.tape.push(value, op, rg))
    }

    fn binary(&self, other: Var<'t>, op: Op, f: impl FnOnce(&Tensor, &Tensor) -> Result<Tensor>) -> Result<Var<'t>> {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
        let (value, rg) = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id], &nodes[other.id]);
            (f(&a.value, &b.value)?, a.requires_grad || b.requires_grad)
        };
        Ok(self.tape.push(value, op, rg))
    }

    pub fn matmul(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::MatMul(self.id, other.id), |a, b| a.matmul(b))
    }

    pub fn add(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Add(self.id, other.id), |a, b| {
            same_shape("add", a, b)?;
            Ok(a.zip_map(b, |x, y| x + y))
        })
    }

    pub fn sub(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Sub(self.id, other.id), |a, b| {
            same_shape("sub", a, b)?;
            Ok(a.zip_map(b, |x, y| x - y))
        })
    }

    /// Elementwise product.
    pub fn mul(&self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, Op::Mul(self.id, other.id), |a, b| {
            same_shape("mul", a, b)?;
            Ok(a.zip_map(b, |x, y| x * y))
        })
    }

    fn row_broadcast(op: &'static str, x: &Tensor, row: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (_, c) = x.require_matrix(op)?;
        if row.shape() != [1, c] {
            return Err(Error::shape(op, format!("row {:?} against matrix {:?}", row.shape(), x.shape())));
        }
        let mut out = x.clone();
        for (k, v) in out.data_mut().iter_mut().enumerate() {
            *v = f(*v, row.data()[k % c]);
        }
        Ok(out)
    }

    /// Adds a `1 x c` row to every row of an `r x c` matrix.
    pub fn add_row(&self, row: Var<'t>) -> Result<Var<'t>> {
        self.binary(row, Op::AddRow(self.id, row.id), |x, r| Self::row_broadcast("add_row", x, r, |a, b| a + b))
    }

    /// Multiplies every row of an `r x c` matrix elementwise by a `1 x c` row.
    pub fn mul_row(&self, row: Var<'t>) -> Result<Var<'t>> {
        self.binary(row, Op::MulRow(self.id, row.id), |x, r| Self::row_broadcast("mul_row", x, r, |a, b| a * b))
    }

    pub fn scale(&self, k: f64) -> Result<Var<'t>> {
        self.unary(Op::Scale(self.id, k), |x| Ok(x.map(|v| v * k)))
    }

    pub fn add_scalar(&self, c: f64) -> Result<Var<'t>> {
        self.unary(Op::AddScalar(self.id), |x| Ok(x.map(|v| v + c)))
    }

    pub fn transpose(&self) -> Result<Var<'t>> {
        self.unary(Op::Transpose(self.id), Tensor::transpose)
    }

    /// Mean over rows: `r x c` to `1 x c`.
    pub fn row_mean(&self) -> Result<Var<'t>> {
        self.unary(Op::RowMean(self.id), |x| {
            let (r, _) = x.require_matrix("row_mean")?;
            if r == 0 {
                return Err(Error::shape("row_mean", "no rows"));
            }
            Ok(x.column_sums().map(|v| v / r as f64))
        })
    }

    pub fn softmax_rows(&self) -> Result<Var<'t>> {
        self.unary(Op::SoftmaxRows(self.id), |x| {
            let (r, c) = x.require_matrix("softmax_rows")?;
            let mut out = x.clone();
            for i in 0..r {
                let row = &mut out.data_mut()[i * c..(i + 1) * c];
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    total += *v;
                }
                for v in row.iter_mut() {
                    *v /= total;
                }
            }
            Ok(out)
        })
    }

    pub fn relu(&self) -> Result<Var<'t>> {
        self.unary(Op::Relu(self.id), |x| Ok(x.map(|v| v.max(0.0))))
    }

    pub fn sigmoid(&self) -> Result<Var<'t>> {
        self.unary(Op::Sigmoid(self.id), |x| Ok(x.map(sigmoid)))
    }

    /// Natural log with inputs floored at [`LOG_CLAMP`].
    pub fn ln(&self) -> Result<Var<'t>> {
        self.unary(Op::Ln(self.id), |x| Ok(x.map(|v| v.max(LOG_CLAMP).ln())))
    }

    /// Sum of all entries as a scalar.
    pub fn sum(&self) -> Result<Var<'t>> {
        self.unary(Op::Sum(self.id), |x| Ok(Tensor::scalar(x.sum())))
    }

    pub fn mean(&self) -> Result<Var<'t>> {
        let n = self.tape.nodes.borrow()[self.id].value.numel();
        if n == 0 {
            return Err(Error::shape("mean", "empty tensor"));
        }
        self.sum()?.scale(1.0 / n as f64)
    }

    /// Selects rows by index; repeated indices are allowed.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Var<'t>> {
        self.unary(Op::GatherRows(self.id, indices.to_vec()), |x| {
            let (r, c) = x.require_matrix("gather_rows")?;
            let mut d = Vec::with_capacity(indices.len() * c);
            for &i in indices {
                if i >= r {
                    return Err(Error::shape("gather_rows", format!("row {i} of {r}")));
                }
                d.extend_from_slice(x.row(i));
            }
            Tensor::matrix(indices.len(), c, d)
        })
    }

    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> Result<Var<'t>> {
        let idx: Vec<usize> = range.collect();
        self.gather_rows(&idx)
    }

    /// Per-row standardization `(x - mean) / sqrt(var + eps)` without affine terms.
    pub fn layer_norm_rows(&self, eps: f64) -> Result<Var<'t>> {
        let (value, inv, rg) = {
            let nodes = self.tape.nodes.borrow();
            let n = &nodes[self.id];
            let (r, c) = n.value.require_matrix("layer_norm_rows")?;
            let mut out = n.value.clone();
            let mut inv = Vec::with_capacity(r);
            for i in 0..r {
                let row = &mut out.data_mut()[i * c..(i + 1) * c];
                let mean = row.iter().sum::<f64>() / c as f64;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
                let s = 1.0 / (var + eps).sqrt();
                for v in row.iter_mut() {
                    *v = (*v - mean) * s;
                }
                inv.push(s);
            }
            (out, inv, n.requires_grad)
        };
        Ok(self.tape.push(value, Op::LayerNormRows(self.id, inv), rg))
    }
}

/// Column-wise concatenation of matrices with equal row counts.
pub fn concat_columns<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let first = parts.first().ok_or_else(|| Error::shape("concat_columns", "no inputs"))?;
    let tape = first.tape;
    let (value, rg) = {
        let nodes = tape.nodes.borrow();
        let mut rows = None;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let (r, c) = nodes[p.id].value.require_matrix("concat_columns")?;
            if *rows.get_or_insert(r) != r {
                return Err(Error::shape("concat_columns", "row counts differ"));
            }
            widths.push(c);
        }
        let rows = rows.unwrap_or(0);
        let total: usize = widths.iter().sum();
        let mut d = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for p in parts {
                d.extend_from_slice(nodes[p.id].value.row(i));
            }
        }
        let rg = parts.iter().any(|p| nodes[p.id].requires_grad);
        (Tensor::matrix(rows, total, d)?, rg)
    };
    Ok(tape.push(value, Op::ConcatCols(parts.iter().map(|p| p.id).collect()), rg))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
