//! Tape of tensor operations with reverse-mode gradients.
//!
//! Nodes are appended in creation order, so the index order is a
//! topological order and `backward` is a single reverse sweep.

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Gather(Var, Vec<usize>),
    ScatterAdd(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    Square(Var),
    Exp(Var),
    Log(Var),
    Sigmoid(Var),
    Softplus(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    GroupSoftmax(Var, Vec<usize>),
    Cosine(Var, Var),
    L2Normalize(Var),
    GradReverse(Var, f64),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by [`Graph::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

pub fn stable_softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        lhs: a.shape(),
        rhs: b.shape(),
    }
}

fn row_norm(row: &[f64]) -> f64 {
    row.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Input or parameter node.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        self.push(value, Op::Leaf, requires_grad, "leaf")
    }

    pub fn param(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool, name: &str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn unary(&mut self, x: Var, op: Op, name: &str, f: impl Fn(f64) -> f64) -> Result<Var> {
        let value = self.value(x).map(f);
        let rg = self.requires_grad(x);
        self.push(value, op, rg, name)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(op, ta, tb));
        }
        Ok(())
    }

    fn rg2(&self, a: Var, b: Var) -> bool {
        self.requires_grad(a) || self.requires_grad(b)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg2(a, b);
        self.push(value, Op::MatMul(a, b), rg, "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg2(a, b);
        self.push(value, Op::Add(a, b), rg, "add")
    }

    /// Adds a `1 x m` row to every row of an `n x m` tensor.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(row));
        if tr.rows() != 1 || tr.cols() != ta.cols() {
            return Err(shape_err("add_row", ta, tr));
        }
        let mut value = ta.clone();
        for r in 0..value.rows() {
            for (x, b) in value.row_slice_mut(r).iter_mut().zip(tr.data()) {
                *x += b;
            }
        }
        let rg = self.rg2(a, row);
        self.push(value, Op::AddRow(a, row), rg, "add_row")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg2(a, b);
        self.push(value, Op::Sub(a, b), rg, "sub")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg2(a, b);
        self.push(value, Op::Mul(a, b), rg, "mul")
    }

    /// Scales row `i` of an `n x m` tensor by entry `i` of an `n x 1` column.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (ta, tc) = (self.value(a), self.value(col));
        if tc.cols() != 1 || tc.rows() != ta.rows() {
            return Err(shape_err("mul_col", ta, tc));
        }
        let mut value = ta.clone();
        for r in 0..value.rows() {
            let s = tc.data()[r];
            value.row_slice_mut(r).iter_mut().for_each(|x| *x *= s);
        }
        let rg = self.rg2(a, col);
        self.push(value, Op::MulCol(a, col), rg, "mul_col")
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        self.unary(a, Op::Scale(a, factor), "scale", |x| x * factor)
    }

    /// Concatenates along columns; all parts need the same row count.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of nothing".into()))?;
        let rows = self.value(*first).rows();
        for p in parts {
            let t = self.value(*p);
            if t.rows() != rows {
                return Err(shape_err("concat", self.value(*first), t));
            }
        }
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row_slice(r));
            }
        }
        let rg = parts.iter().any(|p| self.requires_grad(*p));
        self.push(Tensor::new(rows, cols, data)?, Op::Concat(parts.to_vec()), rg, "concat")
    }

    /// Columns `start..end`.
    pub fn slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let t = self.value(a);
        if start >= end || end > t.cols() {
            return Err(Error::Shape {
                op: "slice",
                lhs: t.shape(),
                rhs: (start, end),
            });
        }
        let mut data = Vec::with_capacity(t.rows() * (end - start));
        for r in 0..t.rows() {
            data.extend_from_slice(&t.row_slice(r)[start..end]);
        }
        let value = Tensor::new(t.rows(), end - start, data)?;
        let rg = self.requires_grad(a);
        self.push(value, Op::Slice(a, start), rg, "slice")
    }

    /// Row `k` of the output is row `index[k]` of `a`.
    pub fn gather(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let t = self.value(a);
        let mut data = Vec::with_capacity(index.len() * t.cols());
        for &i in index {
            if i >= t.rows() {
                return Err(Error::IndexOutOfRange {
                    what: "gather row",
                    index: i,
                    size: t.rows(),
                });
            }
            data.extend_from_slice(t.row_slice(i));
        }
        let value = Tensor::new(index.len(), t.cols(), data)?;
        let rg = self.requires_grad(a);
        self.push(value, Op::Gather(a, index.to_vec()), rg, "gather")
    }

    /// Sums row `k` of `a` into output row `index[k]`; output has `rows` rows.
    pub fn scatter_add(&mut self, a: Var, index: &[usize], rows: usize) -> Result<Var> {
        let t = self.value(a);
        if index.len() != t.rows() {
            return Err(Error::Shape {
                op: "scatter_add",
                lhs: t.shape(),
                rhs: (index.len(), 1),
            });
        }
        let mut value = Tensor::zeros(rows, t.cols());
        for (k, &i) in index.iter().enumerate() {
            if i >= rows {
                return Err(Error::IndexOutOfRange {
                    what: "scatter row",
                    index: i,
                    size: rows,
                });
            }
            for (o, x) in value.row_slice_mut(i).iter_mut().zip(t.row_slice(k)) {
                *o += x;
            }
        }
        let rg = self.requires_grad(a);
        self.push(value, Op::ScatterAdd(a, index.to_vec()), rg, "scatter_add")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        let rg = self.requires_grad(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg, "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(Error::InvalidArgument("mean of empty tensor".into()));
        }
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        let rg = self.requires_grad(a);
        self.push(Tensor::scalar(m), Op::Mean(a), rg, "mean")
    }

    /// Row sums as an `n x 1` column.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let sums: Vec<f64> = (0..t.rows()).map(|r| t.row_slice(r).iter().sum()).collect();
        let rg = self.requires_grad(a);
        self.push(Tensor::column(&sums), Op::SumCols(a), rg, "sum_cols")
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Square(a), "square", |x| x * x)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Exp(a), "exp", f64::exp)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Log(a), "log", f64::ln)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Sigmoid(a), "sigmoid", stable_sigmoid)
    }

    /// `log(1 + exp(x))`.
    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Softplus(a), "softplus", stable_softplus)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Relu(a), "relu", |x| x.max(0.0))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.unary(a, Op::LeakyRelu(a, slope), "leaky_relu", move |x| {
            if x > 0.0 {
                x
            } else {
                slope * x
            }
        })
    }

    /// Softmax of an `E x 1` column within groups: entries sharing
    /// `group[e]` are normalized together.
    pub fn group_softmax(&mut self, a: Var, group: &[usize], groups: usize) -> Result<Var> {
        let t = self.value(a);
        if t.cols() != 1 || t.rows() != group.len() {
            return Err(Error::Shape {
                op: "group_softmax",
                lhs: t.shape(),
                rhs: (group.len(), 1),
            });
        }
        let mut max = vec![f64::NEG_INFINITY; groups];
        for (&g, &x) in group.iter().zip(t.data()) {
            if g >= groups {
                return Err(Error::IndexOutOfRange {
                    what: "softmax group",
                    index: g,
                    size: groups,
                });
            }
            max[g] = max[g].max(x);
        }
        let exps: Vec<f64> = group
            .iter()
            .zip(t.data())
            .map(|(&g, &x)| (x - max[g]).exp())
            .collect();
        let mut denom = vec![0.0; groups];
        for (&g, &e) in group.iter().zip(&exps) {
            denom[g] += e;
        }
        let out: Vec<f64> = group.iter().zip(&exps).map(|(&g, &e)| e / denom[g]).collect();
        let rg = self.requires_grad(a);
        self.push(
            Tensor::column(&out),
            Op::GroupSoftmax(a, group.to_vec()),
            rg,
            "group_softmax",
        )
    }

    /// Row-wise cosine similarity as an `n x 1` column. Rows with zero norm
    /// yield 0 and pass no gradient.
    pub fn cosine_similarity(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("cosine_similarity", a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let out: Vec<f64> = (0..ta.rows())
            .map(|r| {
                let (x, y) = (ta.row_slice(r), tb.row_slice(r));
                let (nx, ny) = (row_norm(x), row_norm(y));
                if nx == 0.0 || ny == 0.0 {
                    0.0
                } else {
                    x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() / (nx * ny)
                }
            })
            .collect();
        let rg = self.rg2(a, b);
        self.push(Tensor::column(&out), Op::Cosine(a, b), rg, "cosine_similarity")
    }

    /// Scales each row to unit length; zero rows stay zero.
    pub fn l2_normalize(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let mut value = t.clone();
        for r in 0..value.rows() {
            let n = row_norm(t.row_slice(r));
            if n > 0.0 {
                value.row_slice_mut(r).iter_mut().for_each(|x| *x /= n);
            }
        }
        let rg = self.requires_grad(a);
        self.push(value, Op::L2Normalize(a), rg, "l2_normalize")
    }

    /// Identity forward; the backward pass multiplies the incoming gradient
    /// by `-scale`.
    pub fn grad_reverse_scaled(&mut self, a: Var, scale: f64) -> Result<Var> {
        let value = self.value(a).clone();
        let rg = self.requires_grad(a);
        self.push(value, Op::GradReverse(a, scale), rg, "grad_reverse")
    }

    pub fn grad_reverse(&mut self, a: Var) -> Result<Var> {
        self.grad_reverse_scaled(a, 1.0)
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.shape() != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                lhs: lt.shape(),
                rhs: (1, 1),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            if !g.is_finite() {
                return Err(Error::NonFinite(format!("gradient at node {idx}")));
            }
            self.backprop(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mut acc = |v: Var, delta: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot => *slot = Some(delta),
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                acc(*a, g.matmul_t(val(*b)));
                acc(*b, val(*a).t_matmul(g));
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                let mut sums = Tensor::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for (s, x) in sums.data_mut().iter_mut().zip(g.row_slice(r)) {
                        *s += x;
                    }
                }
                acc(*row, sums);
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                acc(*a, g.zip_map(val(*b), |x, y| x * y));
                acc(*b, g.zip_map(val(*a), |x, y| x * y));
            }
            Op::MulCol(a, col) => {
                let (ta, tc) = (val(*a), val(*col));
                let mut da = g.clone();
                let mut dc = Tensor::zeros(tc.rows(), 1);
                for r in 0..g.rows() {
                    let s = tc.data()[r];
                    da.row_slice_mut(r).iter_mut().for_each(|x| *x *= s);
                    dc.data_mut()[r] = g
                        .row_slice(r)
                        .iter()
                        .zip(ta.row_slice(r))
                        .map(|(p, q)| p * q)
                        .sum();
                }
                acc(*a, da);
                acc(*col, dc);
            }
            Op::Scale(a, f) => acc(*a, g.map(|x| x * f)),
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let w = val(*p).cols();
                    let mut d = Tensor::zeros(g.rows(), w);
                    for r in 0..g.rows() {
                        d.row_slice_mut(r)
                            .copy_from_slice(&g.row_slice(r)[offset..offset + w]);
                    }
                    acc(*p, d);
                    offset += w;
                }
            }
            Op::Slice(a, start) => {
                let ta = val(*a);
                let mut d = Tensor::zeros(ta.rows(), ta.cols());
                for r in 0..g.rows() {
                    d.row_slice_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row_slice(r));
                }
                acc(*a, d);
            }
            Op::Gather(a, index) => {
                let ta = val(*a);
                let mut d = Tensor::zeros(ta.rows(), ta.cols());
                for (k, &i) in index.iter().enumerate() {
                    for (o, x) in d.row_slice_mut(i).iter_mut().zip(g.row_slice(k)) {
                        *o += x;
                    }
                }
                acc(*a, d);
            }
            Op::ScatterAdd(a, index) => {
                let ta = val(*a);
                let mut d = Tensor::zeros(ta.rows(), ta.cols());
                for (k, &i) in index.iter().enumerate() {
                    d.row_slice_mut(k).copy_from_slice(g.row_slice(i));
                }
                acc(*a, d);
            }
            Op::Sum(a) => {
                let (r, c) = val(*a).shape();
                acc(*a, Tensor::filled(r, c, g.item()));
            }
            Op::Mean(a) => {
                let (r, c) = val(*a).shape();
                acc(*a, Tensor::filled(r, c, g.item() / (r * c) as f64));
            }
            Op::SumCols(a) => {
                let (r, c) = val(*a).shape();
                let mut d = Tensor::zeros(r, c);
                for i in 0..r {
                    let gi = g.data()[i];
                    d.row_slice_mut(i).iter_mut().for_each(|x| *x = gi);
                }
                acc(*a, d);
            }
            Op::Square(a) => acc(*a, g.zip_map(val(*a), |d, x| 2.0 * x * d)),
            Op::Exp(a) => acc(*a, g.zip_map(&node.value, |d, y| d * y)),
            Op::Log(a) => acc(*a, g.zip_map(val(*a), |d, x| d / x)),
            Op::Sigmoid(a) => acc(*a, g.zip_map(&node.value, |d, s| d * s * (1.0 - s))),
            Op::Softplus(a) => acc(*a, g.zip_map(val(*a), |d, x| d * stable_sigmoid(x))),
            Op::Relu(a) => acc(*a, g.zip_map(val(*a), |d, x| if x > 0.0 { d } else { 0.0 })),
            Op::LeakyRelu(a, slope) => {
                acc(*a, g.zip_map(val(*a), |d, x| if x > 0.0 { d } else { slope * d }))
            }
            Op::GroupSoftmax(a, group) => {
                let y = node.value.data();
                let groups = group.iter().max().map_or(0, |m| m + 1);
                let mut dot = vec![0.0; groups];
                for ((&gi, &yi), &di) in group.iter().zip(y).zip(g.data()) {
                    dot[gi] += yi * di;
                }
                let d: Vec<f64> = group
                    .iter()
                    .zip(y)
                    .zip(g.data())
                    .map(|((&gi, &yi), &di)| yi * (di - dot[gi]))
                    .collect();
                acc(*a, Tensor::column(&d));
            }
            Op::Cosine(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let mut da = Tensor::zeros(ta.rows(), ta.cols());
                let mut db = Tensor::zeros(tb.rows(), tb.cols());
                for r in 0..ta.rows() {
                    let (x, y) = (ta.row_slice(r), tb.row_slice(r));
                    let (nx, ny) = (row_norm(x), row_norm(y));
                    if nx == 0.0 || ny == 0.0 {
                        continue;
                    }
                    let c = node.value.data()[r];
                    let gr = g.data()[r];
                    for (k, o) in da.row_slice_mut(r).iter_mut().enumerate() {
                        *o = gr * (y[k] / (nx * ny) - c * x[k] / (nx * nx));
                    }
                    for (k, o) in db.row_slice_mut(r).iter_mut().enumerate() {
                        *o = gr * (x[k] / (nx * ny) - c * y[k] / (ny * ny));
                    }
                }
                acc(*a, da);
                acc(*b, db);
            }
            Op::L2Normalize(a) => {
                let ta = val(*a);
                let mut d = Tensor::zeros(ta.rows(), ta.cols());
                for r in 0..ta.rows() {
                    let n = row_norm(ta.row_slice(r));
                    if n == 0.0 {
                        continue;
                    }
                    let y = node.value.row_slice(r);
                    let gr = g.row_slice(r);
                    let dot: f64 = y.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for (k, o) in d.row_slice_mut(r).iter_mut().enumerate() {
                        *o = (gr[k] - y[k] * dot) / n;
                    }
                }
                acc(*a, d);
            }
            Op::GradReverse(a, scale) => acc(*a, g.map(|x| -scale * x)),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec_param(g: &mut Graph, xs: &[f64]) -> Var {
        g.param(Tensor::row(xs)).unwrap()
    }

    #[test]
    fn closed_forms() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::scalar(0.0)).unwrap();
        let sp = g.softplus(z).unwrap();
        assert!((g.value(sp).item() - std::f64::consts::LN_2).abs() < 1e-15);
        let sg = g.sigmoid(z).unwrap();
        assert_eq!(g.value(sg).item(), 0.5);
        let five = g.constant(Tensor::scalar(5.0)).unwrap();
        let sp5 = g.softplus(five).unwrap();
        assert!((g.value(sp5).item() - 5.006_715_348_489_118).abs() < 1e-12);
    }

    #[test]
    fn singleton_group_softmax_is_one() {
        let mut g = Graph::new();
        let v = g.constant(Tensor::column(&[3.7, -1.0, 2.0])).unwrap();
        let s = g.group_softmax(v, &[0, 1, 1], 2).unwrap();
        let out = g.value(s).data();
        assert_eq!(out[0], 1.0);
        assert!((out[1] + out[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut g = Graph::new();
        let x = vec_param(&mut g, &[1.0, 2.0, 3.0]);
        let s = g.sum(x).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn square_sum_gradient() {
        let mut g = Graph::new();
        let x = vec_param(&mut g, &[1.0, 2.0]);
        let xx = g.mul(x, x).unwrap();
        let s = g.sum(xx).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn grad_reverse_negates() {
        let mut g = Graph::new();
        let x = vec_param(&mut g, &[1.0, 2.0, 3.0]);
        let r = g.grad_reverse(x).unwrap();
        assert_eq!(g.value(r).data(), &[1.0, 2.0, 3.0]);
        let s = g.sum(r).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[-1.0, -1.0, -1.0]);

        let mut g = Graph::new();
        let x = vec_param(&mut g, &[1.0]);
        let r = g.grad_reverse_scaled(x, 0.25).unwrap();
        let s = g.sum(r).unwrap();
        assert_eq!(g.backward(s).unwrap().get(x).unwrap().data(), &[-0.25]);
    }

    #[test]
    fn errors() {
        let mut g = Graph::new();
        let a = vec_param(&mut g, &[1.0, 2.0]);
        let b = vec_param(&mut g, &[1.0, 2.0, 3.0]);
        assert!(matches!(g.add(a, b), Err(Error::Shape { .. })));
        assert!(matches!(g.matmul(a, a), Err(Error::Shape { .. })));
        let neg = g.constant(Tensor::scalar(-1.0)).unwrap();
        assert!(matches!(g.log(neg), Err(Error::NonFinite(_))));
        assert!(matches!(g.backward(a), Err(Error::Shape { .. })));
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // f = sum(y * y) with y = 3x, evaluated as a DAG and as a tree.
        let x0 = [0.5, -1.5];
        let mut g = Graph::new();
        let x = vec_param(&mut g, &x0);
        let y = g.scale(x, 3.0).unwrap();
        let yy = g.mul(y, y).unwrap();
        let f = g.sum(yy).unwrap();
        let dag = g.backward(f).unwrap().get(x).unwrap().clone();

        let mut g = Graph::new();
        let x = vec_param(&mut g, &x0);
        let y1 = g.scale(x, 3.0).unwrap();
        let y2 = g.scale(x, 3.0).unwrap();
        let yy = g.mul(y1, y2).unwrap();
        let f = g.sum(yy).unwrap();
        let tree = g.backward(f).unwrap().get(x).unwrap().clone();
        assert_eq!(dag, tree);
        assert_eq!(dag.data(), &[9.0, -27.0]);
    }

    #[test]
    fn zero_norm_rows() {
        let mut g = Graph::new();
        let a = g.param(Tensor::new(2, 2, vec![0.0, 0.0, 1.0, 0.0]).unwrap()).unwrap();
        let b = g.param(Tensor::new(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap()).unwrap();
        let c = g.cosine_similarity(a, b).unwrap();
        assert_eq!(g.value(c).data()[0], 0.0);
        assert!((g.value(c).data()[1] - 0.5f64.sqrt()).abs() < 1e-15);
        let n = g.l2_normalize(a).unwrap();
        assert_eq!(g.value(n).row_slice(0), &[0.0, 0.0]);
        let s = g.sum(c).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(a).unwrap().row_slice(0), &[0.0, 0.0]);
    }
}
