//! Define-by-run reverse-mode differentiation.
//!
//! A [`Tape`] records every primitive op in execution order, so the node
//! list is already topologically sorted. [`Tape::backward`] walks it once in
//! reverse and leaves `d loss / d node` for every node that requires a
//! gradient. A fresh tape is built for each forward pass.

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive op kinds, used for fault injection and flop accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    MatMul,
    Add,
    AddRow,
    Sub,
    Mul,
    Scale,
    Affine,
    MulScalar,
    ConcatRows,
    ConcatCols,
    RowSlice,
    ColSlice,
    Sum,
    Mean,
    RowSum,
    Sigmoid,
    Tanh,
    Relu,
    Ln,
    Clamp,
    RowSoftmax,
    GatherRows,
    ScatterAddRows,
    ScaleRows,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Affine(Var, f64),
    MulScalar(Var, Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    RowSlice(Var, usize),
    ColSlice(Var, usize),
    Sum(Var),
    Mean(Var),
    RowSum(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Ln(Var),
    Clamp(Var, f64, f64),
    RowSoftmax(Var),
    GatherRows(Var, Vec<usize>),
    ScatterAddRows(Var, Vec<usize>),
    ScaleRows(Var, Vec<f64>),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::AddRow(..) => OpKind::AddRow,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::Scale(..) => OpKind::Scale,
            Op::Affine(..) => OpKind::Affine,
            Op::MulScalar(..) => OpKind::MulScalar,
            Op::ConcatRows(..) => OpKind::ConcatRows,
            Op::ConcatCols(..) => OpKind::ConcatCols,
            Op::RowSlice(..) => OpKind::RowSlice,
            Op::ColSlice(..) => OpKind::ColSlice,
            Op::Sum(..) => OpKind::Sum,
            Op::Mean(..) => OpKind::Mean,
            Op::RowSum(..) => OpKind::RowSum,
            Op::Sigmoid(..) => OpKind::Sigmoid,
            Op::Tanh(..) => OpKind::Tanh,
            Op::Relu(..) => OpKind::Relu,
            Op::Ln(..) => OpKind::Ln,
            Op::Clamp(..) => OpKind::Clamp,
            Op::RowSoftmax(..) => OpKind::RowSoftmax,
            Op::GatherRows(..) => OpKind::GatherRows,
            Op::ScatterAddRows(..) => OpKind::ScatterAddRows,
            Op::ScaleRows(..) => OpKind::ScaleRows,
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of primitive ops for one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    flops: u64,
    fault: Option<OpKind>,
}

fn same_shape(what: &str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!("{what}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Makes the backward rule of `kind` deliberately wrong (input gradients
    /// scaled by 1.5). Only meant for exercising gradient checks.
    #[doc(hidden)]
    pub fn inject_backward_fault(&mut self, kind: Option<OpKind>) {
        self.fault = kind;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Forward floating-point operation count recorded so far.
    pub fn flops(&self) -> u64 {
        self.flops
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient left by the last [`Tape::backward`]; `None` if `v` was not
    /// reachable from the loss or does not require a gradient.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Records a leaf. Parameters pass `requires_grad = true`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn record(&mut self, value: Tensor, op: Op, inputs: &[Var], flops: usize) -> Var {
        self.flops += flops as u64;
        let rg = self.rg(inputs);
        self.push(value, op, rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let out = va.matmul(vb)?;
        let flops = 2 * va.rows() * va.cols() * vb.cols();
        Ok(self.record(out, Op::MatMul(a, b), &[a, b], flops))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape("add", va, vb)?;
        let out = va.zip_map(vb, |x, y| x + y);
        let n = out.len();
        Ok(self.record(out, Op::Add(a, b), &[a, b], n))
    }

    /// Adds the `1 x c` row `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (va, vr) = (self.value(a), self.value(row));
        if vr.rows() != 1 || vr.cols() != va.cols() {
            return Err(Error::dim(format!("add_row: {:?} onto {:?}", vr.shape(), va.shape())));
        }
        let mut out = va.clone();
        let c = va.cols();
        if c > 0 {
            for chunk in out.data_mut().chunks_mut(c) {
                for (o, &b) in chunk.iter_mut().zip(vr.data()) {
                    *o += b;
                }
            }
        }
        let n = out.len();
        Ok(self.record(out, Op::AddRow(a, row), &[a, row], n))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape("sub", va, vb)?;
        let out = va.zip_map(vb, |x, y| x - y);
        let n = out.len();
        Ok(self.record(out, Op::Sub(a, b), &[a, b], n))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        same_shape("elementwise mul", va, vb)?;
        let out = va.zip_map(vb, |x, y| x * y);
        let n = out.len();
        Ok(self.record(out, Op::Mul(a, b), &[a, b], n))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).map(|x| c * x);
        let n = out.len();
        self.record(out, Op::Scale(a, c), &[a], n)
    }

    /// `mul * a + add`, elementwise.
    pub fn affine(&mut self, a: Var, mul: f64, add: f64) -> Var {
        let out = self.value(a).map(|x| mul * x + add);
        let n = out.len();
        self.record(out, Op::Affine(a, mul), &[a], 2 * n)
    }

    /// Multiplies every entry of `a` by the `1 x 1` value `s`.
    pub fn mul_scalar(&mut self, s: Var, a: Var) -> Result<Var> {
        let vs = self.value(s);
        if vs.shape() != [1, 1] {
            return Err(Error::dim(format!(
                "mul_scalar expects a 1x1 factor, got {:?}",
                vs.shape()
            )));
        }
        let c = vs.item();
        let out = self.value(a).map(|x| c * x);
        let n = out.len();
        Ok(self.record(out, Op::MulScalar(s, a), &[s, a], n))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = parts
            .first()
            .map(|&p| self.value(p).cols())
            .ok_or_else(|| Error::Contract("concat_rows of nothing".into()))?;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                return Err(Error::dim(format!("concat_rows: {} columns vs {cols}", v.cols())));
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        Ok(self.record(out, Op::ConcatRows(parts.to_vec()), parts, 0))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&p| self.value(p).rows())
            .ok_or_else(|| Error::Contract("concat_cols of nothing".into()))?;
        let mut cols = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows() != rows {
                return Err(Error::dim(format!("concat_cols: {} rows vs {rows}", v.rows())));
            }
            cols += v.cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let v = &self.nodes[p.0].value;
            for r in 0..rows {
                for c in 0..v.cols() {
                    out.set(r, offset + c, v.get(r, c));
                }
            }
            offset += v.cols();
        }
        Ok(self.record(out, Op::ConcatCols(parts.to_vec()), parts, 0))
    }

    /// Rows `start .. start + len` of `a`.
    pub fn row_slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let va = self.value(a);
        if start + len > va.rows() {
            return Err(Error::Index {
                what: "row_slice",
                index: start + len,
                bound: va.rows(),
            });
        }
        let c = va.cols();
        let out = Tensor::from_vec(len, c, va.data()[start * c..(start + len) * c].to_vec())?;
        Ok(self.record(out, Op::RowSlice(a, start), &[a], 0))
    }

    /// Columns `start .. start + len` of `a`.
    pub fn col_slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let va = self.value(a);
        if start + len > va.cols() {
            return Err(Error::Index {
                what: "col_slice",
                index: start + len,
                bound: va.cols(),
            });
        }
        let mut out = Tensor::zeros(va.rows(), len);
        for r in 0..va.rows() {
            for c in 0..len {
                out.set(r, c, va.get(r, start + c));
            }
        }
        Ok(self.record(out, Op::ColSlice(a, start), &[a], 0))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let n = va.len();
        let out = Tensor::scalar(va.sum());
        self.record(out, Op::Sum(a), &[a], n)
    }

    /// Mean of all entries; contract error on an empty tensor.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        if va.is_empty() {
            return Err(Error::Contract("mean of an empty tensor".into()));
        }
        let n = va.len();
        let out = Tensor::scalar(va.sum() / n as f64);
        Ok(self.record(out, Op::Mean(a), &[a], n))
    }

    /// Sum of each row, as an `n x 1` column.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let mut out = Tensor::zeros(va.rows(), 1);
        for r in 0..va.rows() {
            out.set(r, 0, va.row_slice(r).iter().sum());
        }
        let n = va.len();
        self.record(out, Op::RowSum(a), &[a], n)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        let n = out.len();
        self.record(out, Op::Sigmoid(a), &[a], 4 * n)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        let n = out.len();
        self.record(out, Op::Tanh(a), &[a], 4 * n)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        let n = out.len();
        self.record(out, Op::Relu(a), &[a], n)
    }

    /// Natural log; every input must be strictly positive.
    pub fn ln(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        if let Some(bad) = va.data().iter().find(|&&x| x <= 0.0 || x.is_nan()) {
            return Err(Error::Numeric(format!("ln of non-positive value {bad}")));
        }
        let out = va.map(f64::ln);
        let n = out.len();
        Ok(self.record(out, Op::Ln(a), &[a], 4 * n))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where clamping bites.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let out = self.value(a).map(|x| x.clamp(lo, hi));
        let n = out.len();
        self.record(out, Op::Clamp(a, lo, hi), &[a], n)
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let mut out = va.clone();
        let c = va.cols();
        if c > 0 {
            for row in out.data_mut().chunks_mut(c) {
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for x in row.iter_mut() {
                    *x = (*x - m).exp();
                    z += *x;
                }
                for x in row.iter_mut() {
                    *x /= z;
                }
            }
        }
        let n = out.len();
        self.record(out, Op::RowSoftmax(a), &[a], 5 * n)
    }

    /// `out[i] = a[index[i]]`.
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let va = self.value(a);
        let c = va.cols();
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index {
            if i >= va.rows() {
                return Err(Error::Index {
                    what: "gather_rows source",
                    index: i,
                    bound: va.rows(),
                });
            }
            data.extend_from_slice(va.row_slice(i));
        }
        let out = Tensor::from_vec(index.len(), c, data)?;
        let n = out.len();
        Ok(self.record(out, Op::GatherRows(a, index.to_vec()), &[a], n))
    }

    /// `out[index[i]] += a[i]` into a fresh `rows x cols` zero matrix.
    pub fn scatter_add_rows(&mut self, a: Var, index: &[usize], rows: usize) -> Result<Var> {
        let va = self.value(a);
        if index.len() != va.rows() {
            return Err(Error::dim(format!(
                "scatter_add_rows: {} indices for {} rows",
                index.len(),
                va.rows()
            )));
        }
        let c = va.cols();
        let mut out = Tensor::zeros(rows, c);
        for (src, &dst) in index.iter().enumerate() {
            if dst >= rows {
                return Err(Error::Index {
                    what: "scatter_add_rows target",
                    index: dst,
                    bound: rows,
                });
            }
            let s = va.row_slice(src);
            for (o, &x) in out.data_mut()[dst * c..(dst + 1) * c].iter_mut().zip(s) {
                *o += x;
            }
        }
        let n = va.len();
        Ok(self.record(out, Op::ScatterAddRows(a, index.to_vec()), &[a], n))
    }

    /// Multiplies row `i` of `a` by the constant `factors[i]`.
    pub fn scale_rows(&mut self, a: Var, factors: &[f64]) -> Result<Var> {
        let va = self.value(a);
        if factors.len() != va.rows() {
            return Err(Error::dim(format!(
                "scale_rows: {} factors for {} rows",
                factors.len(),
                va.rows()
            )));
        }
        let mut out = va.clone();
        let c = va.cols();
        if c > 0 {
            for (row, &f) in out.data_mut().chunks_mut(c).zip(factors) {
                row.iter_mut().for_each(|x| *x *= f);
            }
        }
        let n = out.len();
        Ok(self.record(out, Op::ScaleRows(a, factors.to_vec()), &[a], n))
    }

    /// Populates gradients of every node reachable from the scalar `loss`.
    ///
    /// Gradients from a previous call are discarded first, so repeated calls
    /// give identical results.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.shape(loss);
        if shape != [1, 1] {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {shape:?}"
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let mut contribs = self.input_grads(node, &g)?;
            if self.fault == Some(node.op.kind()) {
                for (_, t) in &mut contribs {
                    *t = t.map(|x| 1.5 * x);
                }
            }
            for (v, t) in contribs {
                if !self.nodes[v.0].requires_grad {
                    continue;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.add_assign(&t),
                    slot @ None => *slot = Some(t),
                }
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn input_grads(&self, node: &Node, g: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let val = |v: Var| &self.nodes[v.0].value;
        let out = match &node.op {
            Op::Leaf => vec![],
            Op::MatMul(a, b) => {
                let da = g.matmul(&val(*b).transpose())?;
                let db = val(*a).transpose().matmul(g)?;
                vec![(*a, da), (*b, db)]
            }
            Op::Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
            Op::AddRow(a, r) => {
                let mut dr = Tensor::zeros(1, g.cols());
                for i in 0..g.rows() {
                    for c in 0..g.cols() {
                        dr.data_mut()[c] += g.get(i, c);
                    }
                }
                vec![(*a, g.clone()), (*r, dr)]
            }
            Op::Sub(a, b) => vec![(*a, g.clone()), (*b, g.map(|x| -x))],
            Op::Mul(a, b) => vec![
                (*a, g.zip_map(val(*b), |x, y| x * y)),
                (*b, g.zip_map(val(*a), |x, y| x * y)),
            ],
            Op::Scale(a, c) | Op::Affine(a, c) => vec![(*a, g.map(|x| c * x))],
            Op::MulScalar(s, a) => {
                let c = val(*s).item();
                let ds: f64 = g.data().iter().zip(val(*a).data()).map(|(x, y)| x * y).sum();
                vec![(*s, Tensor::scalar(ds)), (*a, g.map(|x| c * x))]
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                let c = g.cols();
                parts
                    .iter()
                    .map(|&p| {
                        let r = val(p).rows();
                        let t = Tensor::from_vec(r, c, g.data()[offset * c..(offset + r) * c].to_vec());
                        offset += r;
                        t.map(|t| (p, t))
                    })
                    .collect::<Result<_>>()?
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                parts
                    .iter()
                    .map(|&p| {
                        let pc = val(p).cols();
                        let mut t = Tensor::zeros(g.rows(), pc);
                        for r in 0..g.rows() {
                            for c in 0..pc {
                                t.set(r, c, g.get(r, offset + c));
                            }
                        }
                        offset += pc;
                        (p, t)
                    })
                    .collect()
            }
            Op::RowSlice(a, start) => {
                let va = val(*a);
                let mut t = Tensor::zeros(va.rows(), va.cols());
                let c = va.cols();
                t.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                vec![(*a, t)]
            }
            Op::ColSlice(a, start) => {
                let va = val(*a);
                let mut t = Tensor::zeros(va.rows(), va.cols());
                for r in 0..g.rows() {
                    for c in 0..g.cols() {
                        t.set(r, start + c, g.get(r, c));
                    }
                }
                vec![(*a, t)]
            }
            Op::Sum(a) => {
                let va = val(*a);
                vec![(*a, Tensor::filled(va.rows(), va.cols(), g.item()))]
            }
            Op::Mean(a) => {
                let va = val(*a);
                let n = va.len() as f64;
                vec![(*a, Tensor::filled(va.rows(), va.cols(), g.item() / n))]
            }
            Op::RowSum(a) => {
                let va = val(*a);
                let mut t = Tensor::zeros(va.rows(), va.cols());
                for r in 0..va.rows() {
                    for c in 0..va.cols() {
                        t.set(r, c, g.get(r, 0));
                    }
                }
                vec![(*a, t)]
            }
            Op::Sigmoid(a) => vec![(*a, g.zip_map(&node.value, |gx, y| gx * y * (1.0 - y)))],
            Op::Tanh(a) => vec![(*a, g.zip_map(&node.value, |gx, y| gx * (1.0 - y * y)))],
            Op::Relu(a) => vec![(*a, g.zip_map(val(*a), |gx, x| if x > 0.0 { gx } else { 0.0 }))],
            Op::Ln(a) => vec![(*a, g.zip_map(val(*a), |gx, x| gx / x))],
            Op::Clamp(a, lo, hi) => vec![(
                *a,
                g.zip_map(val(*a), |gx, x| if x >= *lo && x <= *hi { gx } else { 0.0 }),
            )],
            Op::RowSoftmax(a) => {
                let y = &node.value;
                let mut t = Tensor::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let dot: f64 = (0..y.cols()).map(|c| g.get(r, c) * y.get(r, c)).sum();
                    for c in 0..y.cols() {
                        t.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                    }
                }
                vec![(*a, t)]
            }
            Op::GatherRows(a, index) => {
                let va = val(*a);
                let c = va.cols();
                let mut t = Tensor::zeros(va.rows(), c);
                for (i, &src) in index.iter().enumerate() {
                    for k in 0..c {
                        t.data_mut()[src * c + k] += g.get(i, k);
                    }
                }
                vec![(*a, t)]
            }
            Op::ScatterAddRows(a, index) => {
                let va = val(*a);
                let c = va.cols();
                let mut data = Vec::with_capacity(va.len());
                for &dst in index {
                    data.extend_from_slice(g.row_slice(dst));
                }
                vec![(*a, Tensor::from_vec(index.len(), c, data)?)]
            }
            Op::ScaleRows(a, factors) => {
                let mut t = g.clone();
                let c = g.cols();
                if c > 0 {
                    for (row, &f) in t.data_mut().chunks_mut(c).zip(factors) {
                        row.iter_mut().for_each(|x| *x *= f);
                    }
                }
                vec![(*a, t)]
            }
        };
        Ok(out)
    }
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matmul_is_noop() {
        let mut tape = Tape::new();
        let i = tape.constant(Tensor::identity(2));
        let m = Tensor::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.5, 4.0, -1.0]]).unwrap();
        let x = tape.constant(m.clone());
        let y = tape.matmul(i, x).unwrap();
        assert_eq!(tape.value(y), &m);
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::row(&[0.0, 0.0]));
        let y = tape.row_softmax(x);
        assert_eq!(tape.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn scatter_add_sums_collisions() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![1.0], vec![2.0]]).unwrap());
        let y = tape.scatter_add_rows(x, &[0, 0], 1).unwrap();
        assert_eq!(tape.value(y).data(), &[3.0]);
    }

    #[test]
    fn grad_of_sum_of_squares() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::row(&[1.0, 2.0]), true);
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.sum(sq);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn sigmoid_slope_at_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(0.0), true);
        let y = tape.sigmoid(x);
        tape.backward(y).unwrap();
        assert_eq!(tape.grad(x).unwrap().item(), 0.25);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::row(&[1.0, 2.0]), true);
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn shape_and_index_errors() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(2, 3));
        let b = tape.constant(Tensor::zeros(2, 3));
        assert!(matches!(tape.matmul(a, b), Err(Error::Dimension(_))));
        assert!(matches!(tape.gather_rows(a, &[2]), Err(Error::Index { .. })));
        assert!(matches!(tape.scatter_add_rows(a, &[0, 5], 3), Err(Error::Index { .. })));
    }

    #[test]
    fn unreachable_leaf_keeps_no_grad() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::scalar(3.0), true);
        let unused = tape.leaf(Tensor::scalar(1.0), true);
        let y = tape.mul(x, x).unwrap();
        tape.backward(y).unwrap();
        assert!(tape.grad(unused).is_none());
        assert_eq!(tape.grad(x).unwrap().item(), 6.0);
    }

    #[test]
    fn backward_twice_is_idempotent() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::row(&[0.3, -0.7]), true);
        let t = tape.tanh(x);
        let y = tape.mul(t, x).unwrap();
        let loss = tape.sum(y);
        tape.backward(loss).unwrap();
        let first = tape.grad(x).unwrap().clone();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &first);
    }
}
