//! Reverse-mode automatic differentiation over `Mat` values.

use super::tensor::{Mat, SparseMat};
use crate::error::{Error, Result};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Aggregate(Arc<SparseMat>, Var),
    Act(Activation, Var),
    Softmax(Var),
    MeanRows(Var),
    Concat(Vec<Var>),
    ConcatRows(Vec<Var>),
    Reshape(Var),
    SelectRows(Var, Vec<usize>),
    SliceCols(Var, usize),
    Mse(Var, Mat),
    Dot(Var, Mat),
}

struct Node {
    value: Mat,
    op: Op,
}

/// Records a computation; `backward` fills gradients for every node.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Mat>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<&Mat> {
        self.nodes
            .get(v.0)
            .map(|n| &n.value)
            .ok_or_else(|| Error::State(format!("variable {} is not on this tape", v.0)))
    }

    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.check(a)?.matmul(self.check(b)?)?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    /// Adds the `1 x c` row `b` to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.check(x)?, self.check(b)?);
        if bv.rows != 1 || bv.cols != xv.cols {
            return Err(Error::Dimension(format!(
                "bias {}x{} for {}x{}",
                bv.rows, bv.cols, xv.rows, xv.cols
            )));
        }
        let mut out = xv.clone();
        for r in 0..out.rows {
            for (o, bb) in out.row_mut(r).iter_mut().zip(&bv.data) {
                *o += bb;
            }
        }
        Ok(self.push(out, Op::AddBias(x, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.check(a)?, self.check(b)?);
        if av.shape() != bv.shape() {
            return Err(Error::Dimension("add of different shapes".into()));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Graph aggregation `A x` with a constant sparse `A`.
    pub fn aggregate(&mut self, a: Arc<SparseMat>, x: Var) -> Result<Var> {
        let out = a.matmul(self.check(x)?)?;
        Ok(self.push(out, Op::Aggregate(a, x)))
    }

    pub fn act(&mut self, kind: Activation, x: Var) -> Result<Var> {
        let xv = self.check(x)?;
        let out = match kind {
            Activation::Identity => return Ok(x),
            Activation::Relu => xv.map(|v| v.max(0.0)),
            Activation::Tanh => xv.map(f64::tanh),
        };
        Ok(self.push(out, Op::Act(kind, x)))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let xv = self.check(x)?;
        let mut out = xv.clone();
        for r in 0..out.rows {
            softmax_in_place(out.row_mut(r));
        }
        Ok(self.push(out, Op::Softmax(x)))
    }

    /// Column means as a `1 x c` row.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var> {
        let xv = self.check(x)?;
        if xv.rows == 0 {
            return Err(Error::Dimension("mean over zero rows".into()));
        }
        let mut out = Mat::zeros(1, xv.cols);
        for r in 0..xv.rows {
            for (o, v) in out.data.iter_mut().zip(xv.row(r)) {
                *o += v;
            }
        }
        let n = xv.rows as f64;
        out.data.iter_mut().for_each(|v| *v /= n);
        Ok(self.push(out, Op::MeanRows(x)))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let mut rows = None;
        let mut cols = 0;
        for p in parts {
            let v = self.check(*p)?;
            if *rows.get_or_insert(v.rows) != v.rows {
                return Err(Error::Dimension("concat of different row counts".into()));
            }
            cols += v.cols;
        }
        let rows = rows.ok_or_else(|| Error::Dimension("concat of nothing".into()))?;
        let mut out = Mat::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            for p in parts {
                let v = &self.nodes[p.0].value;
                out.row_mut(r)[c0..c0 + v.cols].copy_from_slice(v.row(r));
                c0 += v.cols;
            }
        }
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let mut cols = None;
        let mut data = Vec::new();
        for p in parts {
            let v = self.check(*p)?;
            if *cols.get_or_insert(v.cols) != v.cols {
                return Err(Error::Dimension("row concat of different widths".into()));
            }
            data.extend_from_slice(&v.data);
        }
        let cols = cols.ok_or_else(|| Error::Dimension("concat of nothing".into()))?;
        let out = Mat::from_vec(data.len() / cols.max(1), cols, data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    /// Reinterprets the row-major storage with a new shape.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let out = Mat::from_vec(rows, cols, self.check(x)?.data.clone())?;
        Ok(self.push(out, Op::Reshape(x)))
    }

    pub fn select_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let xv = self.check(x)?;
        if let Some(bad) = idx.iter().find(|&&i| i >= xv.rows) {
            return Err(Error::Dimension(format!("row {bad} of {}", xv.rows)));
        }
        let mut out = Mat::zeros(idx.len(), xv.cols);
        for (r, &i) in idx.iter().enumerate() {
            out.row_mut(r).copy_from_slice(xv.row(i));
        }
        Ok(self.push(out, Op::SelectRows(x, idx.to_vec())))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let xv = self.check(x)?;
        if start > end || end > xv.cols {
            return Err(Error::Dimension(format!("columns {start}..{end} of {}", xv.cols)));
        }
        let mut out = Mat::zeros(xv.rows, end - start);
        for r in 0..xv.rows {
            out.row_mut(r).copy_from_slice(&xv.row(r)[start..end]);
        }
        Ok(self.push(out, Op::SliceCols(x, start)))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, x: Var, target: Mat) -> Result<Var> {
        let xv = self.check(x)?;
        if xv.shape() != target.shape() || xv.is_empty() {
            return Err(Error::Dimension("mse target shape".into()));
        }
        let l = xv.data.iter().zip(&target.data).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
            / xv.len() as f64;
        Ok(self.push(Mat::scalar(l), Op::Mse(x, target)))
    }

    /// `sum(w .* x)` with constant weights.
    pub fn dot(&mut self, x: Var, w: Mat) -> Result<Var> {
        let xv = self.check(x)?;
        if xv.shape() != w.shape() {
            return Err(Error::Dimension("dot weight shape".into()));
        }
        let s = xv.data.iter().zip(&w.data).map(|(a, b)| a * b).sum();
        Ok(self.push(Mat::scalar(s), Op::Dot(x, w)))
    }

    /// Back-propagates from a scalar. Gradients are readable via `grad`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lv = self.check(loss)?;
        if lv.shape() != (1, 1) {
            return Err(Error::State("backward needs a scalar loss".into()));
        }
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Mat::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let mut acc = |v: Var, d: Mat| match &mut grads[v.0] {
                Some(e) => e.add_assign(&d),
                slot @ None => *slot = Some(d),
            };
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    acc(*a, g.matmul_t(bv));
                    acc(*b, av.t_matmul(&g));
                }
                Op::AddBias(x, b) => {
                    let mut db = Mat::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (o, v) in db.data.iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(*b, db);
                    acc(*x, g.clone());
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g.clone());
                }
                Op::Aggregate(a, x) => acc(*x, a.t_matmul(&g)),
                Op::Act(kind, x) => {
                    let y = &node.value;
                    let mut d = g.clone();
                    for (dv, yv) in d.data.iter_mut().zip(&y.data) {
                        *dv *= match kind {
                            Activation::Relu => f64::from(u8::from(*yv > 0.0)),
                            Activation::Tanh => 1.0 - yv * yv,
                            Activation::Identity => 1.0,
                        };
                    }
                    acc(*x, d);
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let mut d = Mat::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let s: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((o, yv), gv) in d.row_mut(r).iter_mut().zip(yr).zip(gr) {
                            *o = yv * (gv - s);
                        }
                    }
                    acc(*x, d);
                }
                Op::MeanRows(x) => {
                    let rows = self.nodes[x.0].value.rows;
                    let mut d = Mat::zeros(rows, g.cols);
                    for r in 0..rows {
                        for (o, v) in d.row_mut(r).iter_mut().zip(&g.data) {
                            *o = v / rows as f64;
                        }
                    }
                    acc(*x, d);
                }
                Op::Concat(parts) => {
                    let mut c0 = 0;
                    for p in parts {
                        let cols = self.nodes[p.0].value.cols;
                        let mut d = Mat::zeros(g.rows, cols);
                        for r in 0..g.rows {
                            d.row_mut(r).copy_from_slice(&g.row(r)[c0..c0 + cols]);
                        }
                        c0 += cols;
                        acc(*p, d);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let (r, c) = self.nodes[p.0].value.shape();
                        let d = Mat { rows: r, cols: c, data: g.data[off..off + r * c].to_vec() };
                        off += r * c;
                        acc(*p, d);
                    }
                }
                Op::Reshape(x) => {
                    let (r, c) = self.nodes[x.0].value.shape();
                    acc(*x, Mat { rows: r, cols: c, data: g.data.clone() });
                }
                Op::SelectRows(x, idx) => {
                    let xv = &self.nodes[x.0].value;
                    let mut d = Mat::zeros(xv.rows, xv.cols);
                    for (r, &i) in idx.iter().enumerate() {
                        for (o, v) in d.row_mut(i).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    acc(*x, d);
                }
                Op::SliceCols(x, start) => {
                    let xv = &self.nodes[x.0].value;
                    let mut d = Mat::zeros(xv.rows, xv.cols);
                    for r in 0..g.rows {
                        d.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                    }
                    acc(*x, d);
                }
                Op::Mse(x, t) => {
                    let xv = &self.nodes[x.0].value;
                    let k = 2.0 * g.data[0] / xv.len() as f64;
                    let d = Mat {
                        rows: xv.rows,
                        cols: xv.cols,
                        data: xv.data.iter().zip(&t.data).map(|(a, b)| k * (a - b)).collect(),
                    };
                    acc(*x, d);
                }
                Op::Dot(x, w) => acc(*x, w.map(|v| v * g.data[0])),
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    pub fn grad(&self, v: Var) -> Result<&Mat> {
        if self.grads.is_empty() {
            return Err(Error::State("backward has not been run".into()));
        }
        self.grads
            .get(v.0)
            .and_then(Option::as_ref)
            .ok_or_else(|| Error::State(format!("no gradient reached variable {}", v.0)))
    }

    /// Gradient of `v`, or zeros of its shape when the loss did not depend on it.
    pub fn grad_or_zero(&self, v: Var) -> Result<Mat> {
        if self.grads.is_empty() {
            return Err(Error::State("backward has not been run".into()));
        }
        let (r, c) = self.check(v)?.shape();
        Ok(self.grads.get(v.0).and_then(Option::clone).unwrap_or_else(|| Mat::zeros(r, c)))
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in row.iter_mut() {
        *v /= s;
    }
}
