//! Reverse-mode tape.
//!
//! Nodes are appended in evaluation order, so the creation order is already a
//! topological order and `backward` just walks the tape in reverse.

use crate::error::{DiffError, Result};
use crate::tensor::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Value(usize);

impl Value {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Value, Value),
    Transpose(Value),
    Add(Value, Value),
    Sub(Value, Value),
    Mul(Value, Value),
    AddRow(Value, Value),
    Scale(Value, f64),
    AddScalar(Value),
    Relu(Value),
    Sigmoid(Value),
    Exp(Value),
    Log(Value),
    Tanh(Value),
    Clamp(Value, f64, f64),
    LayerNorm {
        x: Value,
        gain: Value,
        bias: Value,
        // normalized input and 1/std per row, kept for backward
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    ConcatCols(Vec<Value>),
    GatherRows(Value, Vec<usize>),
    MaskedSoftmax(Value),
    SumAll(Value),
    MeanRows(Value, Vec<bool>),
    AdditiveScores(Value, Value, Value),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A single forward/backward computation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds an input tensor. Leaves with `requires_grad` collect gradients.
    pub fn leaf(&mut self, tensor: Tensor, requires_grad: bool) -> Value {
        self.nodes.push(Node {
            value: tensor,
            op: Op::Leaf,
            requires_grad,
        });
        Value(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, tensor: Tensor) -> Value {
        self.leaf(tensor, false)
    }

    pub fn value(&self, v: Value) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Value) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn grad(&self, v: Value) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn zero_grad(&mut self) {
        self.grads.clear();
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, inputs: &[Value]) -> Result<Value> {
        if !value.is_finite() {
            return Err(DiffError::NonFinite { op: op_name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Value(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Value, b: Value) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(DiffError::shape(op, sa, sb));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Value, b: Value) -> Result<Value> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push("matmul", out, Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Value) -> Result<Value> {
        let out = self.value(a).transpose();
        self.push("transpose", out, Op::Transpose(a), &[a])
    }

    pub fn add(&mut self, a: Value, b: Value) -> Result<Value> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push("add", out, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Value, b: Value) -> Result<Value> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push("sub", out, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Value, b: Value) -> Result<Value> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push("mul", out, Op::Mul(a, b), &[a, b])
    }

    /// Adds a `1×c` row vector to every row of an `r×c` matrix.
    pub fn add_row(&mut self, a: Value, row: Value) -> Result<Value> {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.len() != ta.cols() {
            return Err(DiffError::shape("add_row", ta.shape(), tr.shape()));
        }
        let mut out = ta.clone();
        let c = ta.cols();
        for r in 0..ta.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(tr.data()) {
                *o += b;
            }
        }
        debug_assert_eq!(out.cols(), c);
        self.push("add_row", out, Op::AddRow(a, row), &[a, row])
    }

    pub fn scale(&mut self, a: Value, c: f64) -> Result<Value> {
        let out = self.value(a).map(|x| x * c);
        self.push("scale", out, Op::Scale(a, c), &[a])
    }

    pub fn add_scalar(&mut self, a: Value, c: f64) -> Result<Value> {
        let out = self.value(a).map(|x| x + c);
        self.push("add_scalar", out, Op::AddScalar(a), &[a])
    }

    pub fn relu(&mut self, a: Value) -> Result<Value> {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push("relu", out, Op::Relu(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Value) -> Result<Value> {
        let out = self.value(a).map(sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(a), &[a])
    }

    pub fn exp(&mut self, a: Value) -> Result<Value> {
        let out = self.value(a).map(f64::exp);
        self.push("exp", out, Op::Exp(a), &[a])
    }

    pub fn log(&mut self, a: Value) -> Result<Value> {
        let out = self.value(a).map(f64::ln);
        self.push("log", out, Op::Log(a), &[a])
    }

    pub fn tanh(&mut self, a: Value) -> Result<Value> {
        let out = self.value(a).map(f64::tanh);
        self.push("tanh", out, Op::Tanh(a), &[a])
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where clamping was active.
    pub fn clamp(&mut self, a: Value, lo: f64, hi: f64) -> Result<Value> {
        let out = self.value(a).map(|x| x.clamp(lo, hi));
        self.push("clamp", out, Op::Clamp(a, lo, hi), &[a])
    }

    /// Normalizes each row to zero mean and unit variance, then applies
    /// `gain` and `bias` (both `1×c`).
    pub fn layer_norm(&mut self, x: Value, gain: Value, bias: Value, eps: f64) -> Result<Value> {
        let tx = self.value(x);
        let c = tx.cols();
        for p in [gain, bias] {
            if self.value(p).len() != c {
                return Err(DiffError::shape("layer_norm", tx.shape(), self.value(p).shape()));
            }
        }
        let (tg, tb) = (self.value(gain), self.value(bias));
        let mut xhat = tx.clone();
        let mut out = tx.clone();
        let mut inv_std = Vec::with_capacity(tx.rows());
        for r in 0..tx.rows() {
            let row = tx.row(r);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for j in 0..c {
                let h = (row[j] - mean) * is;
                xhat.set(r, j, h);
                out.set(r, j, h * tg.data()[j] + tb.data()[j]);
            }
        }
        self.push(
            "layer_norm",
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            &[x, gain, bias],
        )
    }

    /// Concatenates along the last dimension.
    pub fn concat_cols(&mut self, xs: &[Value]) -> Result<Value> {
        let Some(&first) = xs.first() else {
            return Err(DiffError::Invalid {
                op: "concat_cols",
                msg: "no inputs".into(),
            });
        };
        let rows = self.value(first).rows();
        for &x in xs {
            if self.value(x).rows() != rows {
                return Err(DiffError::shape("concat_cols", self.value(first).shape(), self.value(x).shape()));
            }
        }
        let total: usize = xs.iter().map(|&x| self.value(x).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &x in xs {
                data.extend_from_slice(self.value(x).row(r));
            }
        }
        let out = Tensor::matrix(rows, total, data)?;
        self.push("concat_cols", out, Op::ConcatCols(xs.to_vec()), xs)
    }

    /// Selects rows by index (repeats allowed).
    pub fn gather_rows(&mut self, a: Value, idx: &[usize]) -> Result<Value> {
        let ta = self.value(a);
        let c = ta.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            if i >= ta.rows() {
                return Err(DiffError::Invalid {
                    op: "gather_rows",
                    msg: format!("row {i} out of range for {:?}", ta.shape()),
                });
            }
            data.extend_from_slice(ta.row(i));
        }
        let out = Tensor::matrix(idx.len(), c, data)?;
        self.push("gather_rows", out, Op::GatherRows(a, idx.to_vec()), &[a])
    }

    /// Row softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: Value) -> Result<Value> {
        let mask = vec![true; self.value(a).len()];
        self.masked_softmax_rows(a, &mask)
    }

    /// Row softmax restricted to entries where `mask` is true. Masked entries
    /// get probability zero; a row with no allowed entry becomes all zeros.
    pub fn masked_softmax_rows(&mut self, a: Value, mask: &[bool]) -> Result<Value> {
        let ta = self.value(a);
        if mask.len() != ta.len() {
            return Err(DiffError::shape("masked_softmax_rows", ta.shape(), &[mask.len()]));
        }
        let c = ta.cols();
        let mut out = Tensor::zeros(ta.shape());
        for r in 0..ta.rows() {
            let row = ta.row(r);
            let m = &mask[r * c..(r + 1) * c];
            let max = row
                .iter()
                .zip(m)
                .filter(|(_, &ok)| ok)
                .map(|(&v, _)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                continue;
            }
            let o = out.row_mut(r);
            let mut total = 0.0;
            for j in 0..c {
                if m[j] {
                    o[j] = (row[j] - max).exp();
                    total += o[j];
                }
            }
            for v in o.iter_mut() {
                *v /= total;
            }
        }
        self.push("softmax_rows", out, Op::MaskedSoftmax(a), &[a])
    }

    pub fn sum_all(&mut self, a: Value) -> Result<Value> {
        let out = Tensor::scalar(self.value(a).sum());
        self.push("sum_all", out, Op::SumAll(a), &[a])
    }

    pub fn mean_all(&mut self, a: Value) -> Result<Value> {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum_all(a)?;
        self.scale(s, 1.0 / n)
    }

    /// Mean of the rows selected by `mask`, as a `1×c` row.
    pub fn mean_rows(&mut self, a: Value, mask: &[bool]) -> Result<Value> {
        let ta = self.value(a);
        if mask.len() != ta.rows() {
            return Err(DiffError::shape("mean_rows", ta.shape(), &[mask.len()]));
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(DiffError::EmptyMask);
        }
        let c = ta.cols();
        let mut out = Tensor::zeros(&[1, c]);
        for (r, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            for (o, v) in out.data_mut().iter_mut().zip(ta.row(r)) {
                *o += v;
            }
        }
        out.scale_in_place(1.0 / count as f64);
        self.push("mean_rows", out, Op::MeanRows(a, mask.to_vec()), &[a])
    }

    /// Additive attention logits: `out[i][j] = Σ_c v_c · tanh(q[i][c] + k[j][c])`.
    pub fn additive_scores(&mut self, q: Value, k: Value, v: Value) -> Result<Value> {
        let (tq, tk, tv) = (self.value(q), self.value(k), self.value(v));
        let c = tq.cols();
        if tk.cols() != c || tv.len() != c {
            return Err(DiffError::shape("additive_scores", tq.shape(), tk.shape()));
        }
        let (n, m) = (tq.rows(), tk.rows());
        let mut out = Tensor::zeros(&[n, m]);
        for i in 0..n {
            let qi = tq.row(i);
            for j in 0..m {
                let kj = tk.row(j);
                let s: f64 = (0..c).map(|p| tv.data()[p] * (qi[p] + kj[p]).tanh()).sum();
                out.set(i, j, s);
            }
        }
        self.push("additive_scores", out, Op::AdditiveScores(q, k, v), &[q, k, v])
    }

    /// Accumulates d(loss)/d(node) into every node that requires a gradient.
    /// Repeated calls add to the existing gradients until [`Graph::zero_grad`].
    pub fn backward(&mut self, loss: Value) -> Result<()> {
        let shape = self.value(loss).shape().to_vec();
        if self.value(loss).len() != 1 {
            return Err(DiffError::NonScalarLoss(shape));
        }
        let n = self.nodes.len();
        self.grads.resize(n, None);
        let mut local: Vec<Option<Tensor>> = vec![None; n];
        local[loss.0] = Some(Tensor::ones(&shape));

        for id in (0..=loss.0).rev() {
            let Some(g) = local[id].take() else { continue };
            if !self.nodes[id].requires_grad {
                continue;
            }
            self.propagate(id, &g, &mut local)?;
            match &mut self.grads[id] {
                Some(acc) => acc.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, id: usize, g: &Tensor, local: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[id];
        let out = &node.value;
        let mut send = |v: Value, t: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut local[v.0] {
                Some(acc) => acc.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                if self.requires_grad(*a) {
                    send(*a, g.matmul_nt(tb)?.reshape(ta.shape())?);
                }
                if self.requires_grad(*b) {
                    send(*b, ta.matmul_tn(g)?.reshape(tb.shape())?);
                }
            }
            Op::Transpose(a) => send(*a, g.transpose().reshape(self.value(*a).shape())?),
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Sub(a, b) => {
                send(*a, g.clone());
                send(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                send(*a, g.zip_map(self.value(*b), |x, y| x * y));
                send(*b, g.zip_map(self.value(*a), |x, y| x * y));
            }
            Op::AddRow(a, row) => {
                send(*a, g.clone());
                let mut acc = Tensor::zeros(self.value(*row).shape());
                for r in 0..g.rows() {
                    for (o, v) in acc.data_mut().iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                send(*row, acc);
            }
            Op::Scale(a, c) => send(*a, g.map(|x| x * c)),
            Op::AddScalar(a) => send(*a, g.clone()),
            Op::Relu(a) => send(*a, g.zip_map(self.value(*a), |d, x| if x > 0.0 { d } else { 0.0 })),
            Op::Sigmoid(a) => send(*a, g.zip_map(out, |d, s| d * s * (1.0 - s))),
            Op::Exp(a) => send(*a, g.zip_map(out, |d, e| d * e)),
            Op::Log(a) => send(*a, g.zip_map(self.value(*a), |d, x| d / x)),
            Op::Tanh(a) => send(*a, g.zip_map(out, |d, t| d * (1.0 - t * t))),
            Op::Clamp(a, lo, hi) => send(
                *a,
                g.zip_map(self.value(*a), |d, x| if x < *lo || x > *hi { 0.0 } else { d }),
            ),
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let c = xhat.cols();
                let tg = self.value(*gain);
                let mut dgain = Tensor::zeros(tg.shape());
                let mut dbias = Tensor::zeros(self.value(*bias).shape());
                let mut dx = Tensor::zeros(xhat.shape());
                for r in 0..xhat.rows() {
                    let gr = g.row(r);
                    let hr = xhat.row(r);
                    let mut dh = vec![0.0; c];
                    for j in 0..c {
                        dgain.data_mut()[j] += gr[j] * hr[j];
                        dbias.data_mut()[j] += gr[j];
                        dh[j] = gr[j] * tg.data()[j];
                    }
                    let mean_dh = dh.iter().sum::<f64>() / c as f64;
                    let mean_dh_h = dh.iter().zip(hr).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                    let dxr = dx.row_mut(r);
                    for j in 0..c {
                        dxr[j] = inv_std[r] * (dh[j] - mean_dh - hr[j] * mean_dh_h);
                    }
                }
                send(*x, dx);
                send(*gain, dgain);
                send(*bias, dbias);
            }
            Op::ConcatCols(xs) => {
                let mut offset = 0;
                for &x in xs {
                    let tx = self.value(x);
                    let c = tx.cols();
                    if self.requires_grad(x) {
                        let mut part = Tensor::zeros(tx.shape());
                        for r in 0..g.rows() {
                            part.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + c]);
                        }
                        send(x, part);
                    }
                    offset += c;
                }
            }
            Op::GatherRows(a, idx) => {
                let mut acc = Tensor::zeros(self.value(*a).shape());
                for (r, &i) in idx.iter().enumerate() {
                    for (o, v) in acc.row_mut(i).iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                send(*a, acc);
            }
            Op::MaskedSoftmax(a) => {
                // dx = y ⊙ (g − ⟨g, y⟩) per row; masked entries have y = 0.
                let mut dx = Tensor::zeros(out.shape());
                for r in 0..out.rows() {
                    let (yr, gr) = (out.row(r), g.row(r));
                    let dot: f64 = yr.iter().zip(gr).map(|(y, d)| y * d).sum();
                    for (o, (y, d)) in dx.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                        *o = y * (d - dot);
                    }
                }
                send(*a, dx);
            }
            Op::SumAll(a) => send(*a, Tensor::full(self.value(*a).shape(), g.item())),
            Op::MeanRows(a, mask) => {
                let ta = self.value(*a);
                let count = mask.iter().filter(|&&m| m).count() as f64;
                let mut dx = Tensor::zeros(ta.shape());
                for (r, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
                    for (o, v) in dx.row_mut(r).iter_mut().zip(g.data()) {
                        *o = v / count;
                    }
                }
                send(*a, dx);
            }
            Op::AdditiveScores(q, k, v) => {
                let (tq, tk, tv) = (self.value(*q), self.value(*k), self.value(*v));
                let c = tq.cols();
                let mut dq = Tensor::zeros(tq.shape());
                let mut dk = Tensor::zeros(tk.shape());
                let mut dv = Tensor::zeros(tv.shape());
                for i in 0..tq.rows() {
                    for j in 0..tk.rows() {
                        let d = g.get(i, j);
                        if d == 0.0 {
                            continue;
                        }
                        for p in 0..c {
                            let t = (tq.get(i, p) + tk.get(j, p)).tanh();
                            dv.data_mut()[p] += d * t;
                            let inner = d * tv.data()[p] * (1.0 - t * t);
                            dq.data_mut()[i * c + p] += inner;
                            dk.data_mut()[j * c + p] += inner;
                        }
                    }
                }
                send(*q, dq);
                send(*k, dk);
                send(*v, dv);
            }
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_gradient_is_ones() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::matrix(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0]).unwrap(), true);
        let s = g.sum_all(x).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &Tensor::ones(&[2, 3]));
    }

    #[test]
    fn sigmoid_at_zero_gives_quarter_slope() {
        let mut g = Graph::new();
        let w = g.leaf(Tensor::matrix(1, 3, vec![0.0; 3]).unwrap(), true);
        let x = g.constant(Tensor::matrix(3, 1, vec![1.0, -2.0, 0.5]).unwrap());
        let z = g.matmul(w, x).unwrap();
        let s = g.sigmoid(z).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(w).unwrap().data(), &[0.25, -0.5, 0.125]);
    }

    #[test]
    fn backward_accumulates_across_calls() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0), true);
        let y = g.scale(x, 2.0).unwrap();
        g.backward(y).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 4.0);
        g.zero_grad();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 2.0);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[2, 2]), true);
        assert!(matches!(g.backward(x), Err(DiffError::NonScalarLoss(_))));
    }

    #[test]
    fn softmax_stable_for_large_logits() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::matrix(1, 2, vec![1000.0, 0.0]).unwrap());
        let y = g.softmax_rows(x).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 0.0]);
    }

    #[test]
    fn softmax_uniform_row() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::full(&[1, 4], 3.5));
        let y = g.softmax_rows(x).unwrap();
        assert_eq!(g.value(y).data(), &[0.25; 4]);
    }

    #[test]
    fn masked_row_with_nothing_allowed_is_zero() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let y = g.masked_softmax_rows(x, &[true, false, false, false]).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn elementwise_basics() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::matrix(1, 2, vec![-1.0, 2.0]).unwrap());
        let r = g.relu(x).unwrap();
        assert_eq!(g.value(r).data(), &[0.0, 2.0]);
        let z = g.constant(Tensor::scalar(0.0));
        let s = g.sigmoid(z).unwrap();
        let e = g.exp(z).unwrap();
        assert_eq!(g.value(s).item(), 0.5);
        assert_eq!(g.value(e).item(), 1.0);
    }

    #[test]
    fn layer_norm_of_constant_row_is_zero() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::full(&[1, 5], 7.0));
        let gain = g.constant(Tensor::ones(&[1, 5]));
        let bias = g.constant(Tensor::zeros(&[1, 5]));
        let y = g.layer_norm(x, gain, bias, 1e-5).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mean_rows_rejects_empty_mask() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[2, 2]));
        assert!(matches!(g.mean_rows(x, &[false, false]), Err(DiffError::EmptyMask)));
    }

    #[test]
    fn log_of_zero_is_reported() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::scalar(0.0));
        assert!(matches!(g.log(x), Err(DiffError::NonFinite { op: "log" })));
    }
}
