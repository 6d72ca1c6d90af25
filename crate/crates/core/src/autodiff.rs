//! A small reverse-mode differentiation engine over dense matrices.
//!
//! A [`Tape`] owns every intermediate value produced during a forward pass.
//! Values are addressed by [`Var`] handles; operations append a node and
//! record their parents, and [`Tape::backward`] walks the nodes in reverse
//! creation order, which is a valid reverse topological order because a node
//! can only reference earlier nodes.
//!
//! Every forward op checks its output for NaN/Inf and fails with
//! [`Error::Numeric`] naming the op.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gumbel};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Handle to a value on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    RowGather(Var, Arc<[usize]>),
    SegmentSum(Var, Arc<[usize]>),
    RowScale(Var, Arc<[f64]>),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    ClampMin(Var, f64),
    SoftmaxRows(Var),
    SoftmaxCols(Var),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    CosineSim(Var, Var),
    CrossEntropyLogits(Var, Arc<[usize]>),
    StraightThrough(Var),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Record of one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
    backward_done: bool,
    clamp_events: usize,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of leaves registered with `requires_grad`.
    pub fn num_params(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.op, Op::Leaf) && n.requires_grad)
            .count()
    }

    /// Entries clamped by [`Tape::clamp_min`] so far.
    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> Result<f64> {
        self.value(v)
            .scalar_value()
            .ok_or_else(|| Error::arg("value is not a scalar"))
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` loss with respect to `v`, if `v` was
    /// reachable.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Clears gradients so `backward` may run again.
    pub fn zero_grad(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    pub fn param(&mut self, value: Matrix) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.leaf(value, false)
    }

    pub fn leaf(&mut self, value: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Matrix, op: Op, parents: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::Numeric { op: name });
        }
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push("matmul", v, Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).transpose();
        self.push("transpose", v, Op::Transpose(a), &[a])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        self.push("add", v, Op::Add(a, b), &[a, b])
    }

    /// `a + 1·b` where `b` is a single row broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, row) = (self.value(a), self.value(b));
        if row.rows() != 1 || row.cols() != x.cols() {
            return Err(Error::shape(
                "add_row",
                format!("{:?} + broadcast {:?}", x.shape(), row.shape()),
            ));
        }
        let mut v = x.clone();
        let r = row.as_slice().to_vec();
        for i in 0..v.rows() {
            for (o, b) in v.row_mut(i).iter_mut().zip(&r) {
                *o += b;
            }
        }
        self.push("add_row", v, Op::AddRow(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(self.value(b))?;
        self.push("sub", v, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).hadamard(self.value(b))?;
        self.push("mul", v, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let v = self.value(a).scale(c);
        self.push("scale", v, Op::Scale(a, c), &[a])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Matrix::hstack(&mats)?;
        self.push("concat_cols", v, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Matrix::vstack(&mats)?;
        self.push("concat_rows", v, Op::ConcatRows(parts.to_vec()), parts)
    }

    /// Output row `r` is input row `index[r]`.
    pub fn row_gather(&mut self, a: Var, index: Arc<[usize]>) -> Result<Var> {
        let x = self.value(a);
        if let Some(&bad) = index.iter().find(|&&i| i >= x.rows()) {
            return Err(Error::shape(
                "row_gather",
                format!("index {bad} out of range for {} rows", x.rows()),
            ));
        }
        let v = x.select_rows(&index);
        self.push("row_gather", v, Op::RowGather(a, index), &[a])
    }

    /// Output row `s` is the sum of input rows `r` with `segment[r] == s`.
    pub fn segment_sum(&mut self, a: Var, segment: Arc<[usize]>, num_segments: usize) -> Result<Var> {
        let x = self.value(a);
        if segment.len() != x.rows() {
            return Err(Error::shape(
                "segment_sum",
                format!("{} segment ids for {} rows", segment.len(), x.rows()),
            ));
        }
        if let Some(&bad) = segment.iter().find(|&&s| s >= num_segments) {
            return Err(Error::shape(
                "segment_sum",
                format!("segment {bad} >= {num_segments}"),
            ));
        }
        let mut v = Matrix::zeros(num_segments, x.cols());
        for (r, &s) in segment.iter().enumerate() {
            for (o, &val) in v.row_mut(s).iter_mut().zip(x.row(r)) {
                *o += val;
            }
        }
        self.push("segment_sum", v, Op::SegmentSum(a, segment), &[a])
    }

    /// Multiplies row `r` by the constant `factors[r]`.
    pub fn row_scale(&mut self, a: Var, factors: Arc<[f64]>) -> Result<Var> {
        let x = self.value(a);
        if factors.len() != x.rows() {
            return Err(Error::shape(
                "row_scale",
                format!("{} factors for {} rows", factors.len(), x.rows()),
            ));
        }
        let mut v = x.clone();
        for (r, &f) in factors.iter().enumerate() {
            v.row_mut(r).iter_mut().for_each(|o| *o *= f);
        }
        self.push("row_scale", v, Op::RowScale(a, factors), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push("relu", v, Op::Relu(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(linalg::sigmoid);
        self.push("sigmoid", v, Op::Sigmoid(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(libm::exp);
        self.push("exp", v, Op::Exp(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(libm::log);
        self.push("log", v, Op::Log(a), &[a])
    }

    /// `max(a, floor)`; clamped entries pass no gradient and are counted in
    /// [`Tape::clamp_events`].
    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Result<Var> {
        let x = self.value(a);
        let clamped = x.as_slice().iter().filter(|&&v| v < floor).count();
        let v = x.map(|v| if v < floor { floor } else { v });
        self.clamp_events += clamped;
        self.push("clamp_min", v, Op::ClampMin(a, floor), &[a])
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let v = linalg::softmax_rows(self.value(a));
        self.push("softmax_rows", v, Op::SoftmaxRows(a), &[a])
    }

    pub fn softmax_cols(&mut self, a: Var) -> Result<Var> {
        let v = linalg::softmax_cols(self.value(a));
        self.push("softmax_cols", v, Op::SoftmaxCols(a), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let v = Matrix::scalar(self.value(a).sum());
        self.push("sum", v, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Error::arg("mean of an empty tensor"));
        }
        let v = Matrix::scalar(x.sum() / x.len() as f64);
        self.push("mean", v, Op::Mean(a), &[a])
    }

    /// Row sums as a column vector.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let v = Matrix::from_fn(x.rows(), 1, |i, _| x.row(i).iter().sum());
        self.push("sum_rows", v, Op::SumRows(a), &[a])
    }

    /// Matrix of cosine similarities between the rows of `a` and of `b`.
    pub fn cosine_similarity(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != y.cols() {
            return Err(Error::shape(
                "cosine_similarity",
                format!("widths {} and {}", x.cols(), y.cols()),
            ));
        }
        let nx: Vec<f64> = x.row_iter().map(linalg::norm).collect();
        let ny: Vec<f64> = y.row_iter().map(linalg::norm).collect();
        if nx.iter().chain(&ny).any(|&n| n == 0.0) {
            return Err(Error::Numeric { op: "cosine_similarity (zero-norm row)" });
        }
        let mut v = x.matmul_nt(y)?;
        for i in 0..v.rows() {
            for j in 0..v.cols() {
                v[(i, j)] /= nx[i] * ny[j];
            }
        }
        self.push("cosine_similarity", v, Op::CosineSim(a, b), &[a, b])
    }

    /// Mean over rows of `-log softmax(logits)[i, labels[i]]`.
    pub fn cross_entropy_with_logits(&mut self, logits: Var, labels: Arc<[usize]>) -> Result<Var> {
        let x = self.value(logits);
        if labels.len() != x.rows() || x.rows() == 0 {
            return Err(Error::shape(
                "cross_entropy_with_logits",
                format!("{} labels for {} rows", labels.len(), x.rows()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= x.cols()) {
            return Err(Error::arg(format!("label {bad} >= {} classes", x.cols())));
        }
        let mut total = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let row = x.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + libm::log(row.iter().map(|&v| libm::exp(v - max)).sum::<f64>());
            total += lse - row[y];
        }
        let v = Matrix::scalar(total / labels.len() as f64);
        self.push("cross_entropy_with_logits", v, Op::CrossEntropyLogits(logits, labels), &[logits])
    }

    /// Forward value `hard`, gradient passed unchanged to `soft`.
    pub fn straight_through(&mut self, soft: Var, hard: Matrix) -> Result<Var> {
        self.value(soft).expect_same_shape(&hard, "straight_through")?;
        self.push("straight_through", hard, Op::StraightThrough(soft), &[soft])
    }

    /// Dense layer `x·W + b` with `b` a single row.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add_row(xw, b)
    }

    /// Populates gradients of `loss` with respect to every node that requires
    /// them. Fails on a non-scalar loss or when called twice without
    /// [`Tape::zero_grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::arg("backward already ran on this tape; call zero_grad first"));
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::arg(format!(
                "backward needs a scalar loss, got {:?}",
                self.value(loss).shape()
            )));
        }
        self.backward_done = true;
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.grads[loss.0] = Some(Matrix::scalar(1.0));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.propagate(i, &g)?;
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, g: Matrix) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut self.grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&mut self, i: usize, g: &Matrix) -> Result<()> {
        // Parent contributions are computed first (immutable borrow of the
        // node), then accumulated.
        let mut out: Vec<(Var, Matrix)> = Vec::with_capacity(2);
        let value = &self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                if self.wants(a) {
                    out.push((a, g.matmul_nt(self.value(b))?));
                }
                if self.wants(b) {
                    out.push((b, self.value(a).matmul_tn(g)?));
                }
            }
            &Op::Transpose(a) => out.push((a, g.transpose())),
            &Op::Add(a, b) => {
                out.push((a, g.clone()));
                out.push((b, g.clone()));
            }
            &Op::AddRow(a, b) => {
                out.push((a, g.clone()));
                if self.wants(b) {
                    let mut col = Matrix::zeros(1, g.cols());
                    for r in g.row_iter() {
                        for (o, &x) in col.as_mut_slice().iter_mut().zip(r) {
                            *o += x;
                        }
                    }
                    out.push((b, col));
                }
            }
            &Op::Sub(a, b) => {
                out.push((a, g.clone()));
                out.push((b, g.scale(-1.0)));
            }
            &Op::Mul(a, b) => {
                if self.wants(a) {
                    out.push((a, g.hadamard(self.value(b))?));
                }
                if self.wants(b) {
                    out.push((b, g.hadamard(self.value(a))?));
                }
            }
            &Op::Scale(a, c) => out.push((a, g.scale(c))),
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    out.push((p, g.column_block(start, start + w)));
                    start += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let h = self.value(p).rows();
                    let idx: Vec<usize> = (start..start + h).collect();
                    out.push((p, g.select_rows(&idx)));
                    start += h;
                }
            }
            Op::RowGather(a, index) => {
                let x = self.value(*a);
                let mut d = Matrix::zeros(x.rows(), x.cols());
                for (r, &src) in index.iter().enumerate() {
                    for (o, &v) in d.row_mut(src).iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                out.push((*a, d));
            }
            Op::SegmentSum(a, segment) => out.push((*a, g.select_rows(segment))),
            Op::RowScale(a, factors) => {
                let mut d = g.clone();
                for (r, &f) in factors.iter().enumerate() {
                    d.row_mut(r).iter_mut().for_each(|o| *o *= f);
                }
                out.push((*a, d));
            }
            &Op::Relu(a) => {
                out.push((a, g.zip_map(self.value(a), "relu'", |gv, x| if x > 0.0 { gv } else { 0.0 })?));
            }
            &Op::Sigmoid(a) => out.push((a, g.zip_map(value, "sigmoid'", |gv, y| gv * y * (1.0 - y))?)),
            &Op::Exp(a) => out.push((a, g.hadamard(value)?)),
            &Op::Log(a) => out.push((a, g.zip_map(self.value(a), "log'", |gv, x| gv / x)?)),
            &Op::ClampMin(a, floor) => {
                out.push((a, g.zip_map(self.value(a), "clamp'", |gv, x| if x < floor { 0.0 } else { gv })?));
            }
            &Op::SoftmaxRows(a) => out.push((a, softmax_rows_backward(value, g))),
            &Op::SoftmaxCols(a) => {
                let d = softmax_rows_backward(&value.transpose(), &g.transpose()).transpose();
                out.push((a, d));
            }
            &Op::Sum(a) => {
                let x = self.value(a);
                out.push((a, Matrix::filled(x.rows(), x.cols(), g.as_slice()[0])));
            }
            &Op::Mean(a) => {
                let x = self.value(a);
                out.push((a, Matrix::filled(x.rows(), x.cols(), g.as_slice()[0] / x.len() as f64)));
            }
            &Op::SumRows(a) => {
                let x = self.value(a);
                out.push((a, Matrix::from_fn(x.rows(), x.cols(), |r, _| g[(r, 0)])));
            }
            &Op::CosineSim(a, b) => {
                let (da, db) = cosine_backward(self.value(a), self.value(b), value, g);
                if self.wants(a) {
                    out.push((a, da));
                }
                if self.wants(b) {
                    out.push((b, db));
                }
            }
            Op::CrossEntropyLogits(a, labels) => {
                let x = self.value(*a);
                let mut d = linalg::softmax_rows(x);
                let scale = g.as_slice()[0] / labels.len() as f64;
                for (r, &y) in labels.iter().enumerate() {
                    d[(r, y)] -= 1.0;
                }
                out.push((*a, d.scale(scale)));
            }
            &Op::StraightThrough(soft) => out.push((soft, g.clone())),
        }
        for (v, d) in out {
            if !d.is_finite() {
                return Err(Error::Numeric { op: "backward" });
            }
            self.accumulate(v, d);
        }
        Ok(())
    }
}

fn softmax_rows_backward(y: &Matrix, g: &Matrix) -> Matrix {
    let mut d = Matrix::zeros(y.rows(), y.cols());
    for i in 0..y.rows() {
        let (yr, gr) = (y.row(i), g.row(i));
        let inner = linalg::dot(yr, gr);
        for (o, (&yv, &gv)) in d.row_mut(i).iter_mut().zip(yr.iter().zip(gr)) {
            *o = yv * (gv - inner);
        }
    }
    d
}

fn cosine_backward(a: &Matrix, b: &Matrix, s: &Matrix, g: &Matrix) -> (Matrix, Matrix) {
    let na: Vec<f64> = a.row_iter().map(linalg::norm).collect();
    let nb: Vec<f64> = b.row_iter().map(linalg::norm).collect();
    let mut da = Matrix::zeros(a.rows(), a.cols());
    let mut db = Matrix::zeros(b.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            let gij = g[(i, j)];
            if gij == 0.0 {
                continue;
            }
            let sij = s[(i, j)];
            let (ai, bj) = (a.row(i), b.row(j));
            for k in 0..a.cols() {
                // ∂s/∂a_i = b_j/(|a_i||b_j|) − s·a_i/|a_i|²
                da[(i, k)] += gij * (bj[k] / (na[i] * nb[j]) - sij * ai[k] / (na[i] * na[i]));
                db[(j, k)] += gij * (ai[k] / (na[i] * nb[j]) - sij * bj[k] / (nb[j] * nb[j]));
            }
        }
    }
    (da, db)
}

/// Binary Gumbel-Softmax over the two-class logits `(s, 0)` per element.
///
/// Returns the relaxed probability of the "select" class at temperature
/// `temperature`. With `hard`, the forward value is the exact 0/1 argmax and
/// the gradient flows through the relaxed value (straight-through).
pub fn gumbel_softmax<R: Rng + ?Sized>(
    t: &mut Tape,
    logits: Var,
    temperature: f64,
    rng: &mut R,
    hard: bool,
) -> Result<Var> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::arg(format!("Gumbel temperature must be positive, got {temperature}")));
    }
    let (rows, cols) = t.value(logits).shape();
    let gumbel = Gumbel::new(0.0, 1.0).expect("unit Gumbel is valid");
    let noise = Matrix::from_fn(rows, cols, |_, _| {
        let select: f64 = gumbel.sample(rng);
        let skip: f64 = gumbel.sample(rng);
        select - skip
    });
    let noise = t.constant(noise);
    let shifted = t.add(logits, noise)?;
    let scaled = t.scale(shifted, 1.0 / temperature)?;
    let soft = t.sigmoid(scaled)?;
    if !hard {
        return Ok(soft);
    }
    let hard_values = t.value(scaled).map(|x| if x > 0.0 { 1.0 } else { 0.0 });
    t.straight_through(soft, hard_values)
}

/// Result of comparing reverse-mode gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    /// Largest elementwise relative error over all inputs.
    pub max_rel_error: f64,
    /// Same, per input.
    pub per_input: Vec<f64>,
}

/// Central-difference step.
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Compares reverse-mode gradients of the scalar function `f` with central
/// differences `(f(x+h) − f(x−h)) / 2h`, `h = 1e-5`. The relative error of an
/// entry is `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn gradcheck<F>(inputs: &[Matrix], f: F) -> Result<GradcheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|m| tape.param(m.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;
    let analytic: Vec<Matrix> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, m)| tape.grad(v).cloned().unwrap_or_else(|| Matrix::zeros(m.rows(), m.cols())))
        .collect();

    let eval = |xs: &[Matrix]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = xs.iter().map(|m| t.constant(m.clone())).collect();
        let o = f(&mut t, &vs)?;
        t.scalar(o)
    };

    let mut work: Vec<Matrix> = inputs.to_vec();
    let mut per_input = vec![0.0; inputs.len()];
    for i in 0..inputs.len() {
        for k in 0..inputs[i].len() {
            let x0 = inputs[i].as_slice()[k];
            work[i].as_mut_slice()[k] = x0 + GRADCHECK_STEP;
            let plus = eval(&work)?;
            work[i].as_mut_slice()[k] = x0 - GRADCHECK_STEP;
            let minus = eval(&work)?;
            work[i].as_mut_slice()[k] = x0;
            let numeric = (plus - minus) / (2.0 * GRADCHECK_STEP);
            let a = analytic[i].as_slice()[k];
            let denom = libm::fabs(a).max(libm::fabs(numeric)).max(1e-8);
            let rel = libm::fabs(a - numeric) / denom;
            per_input[i] = f64::max(per_input[i], rel);
        }
    }
    let max_rel_error = per_input.iter().copied().fold(0.0, f64::max);
    Ok(GradcheckReport {
        max_rel_error,
        per_input,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn matmul_identity() {
        let mut t = Tape::new();
        let x = Matrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let i3 = t.constant(Matrix::identity(3));
        let xv = t.constant(x.clone());
        let y = t.matmul(i3, xv).unwrap();
        assert_eq!(t.value(y), &x);
    }

    #[test]
    fn softmax_uniform_row() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::filled(2, 4, 3.5));
        let y = t.softmax_rows(x).unwrap();
        assert!(t.value(y).as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn linear_and_quadratic_grads() {
        let x0 = Matrix::from_fn(2, 3, |i, j| i as f64 - j as f64 + 0.5);
        let mut t = Tape::new();
        let x = t.param(x0.clone());
        let two = t.scale(x, 2.0).unwrap();
        let s = t.sum(two).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &Matrix::filled(2, 3, 2.0));

        let mut t = Tape::new();
        let x = t.param(x0.clone());
        let sq = t.mul(x, x).unwrap();
        let s = t.sum(sq).unwrap();
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &x0.scale(2.0));
    }

    #[test]
    fn backward_contract() {
        let mut t = Tape::new();
        let x = t.param(Matrix::filled(2, 2, 1.0));
        assert!(t.backward(x).is_err());
        let s = t.sum(x).unwrap();
        t.backward(s).unwrap();
        assert!(t.backward(s).is_err());
        t.zero_grad();
        t.backward(s).unwrap();
    }

    #[test]
    fn non_finite_names_op() {
        let mut t = Tape::new();
        let x = t.constant(Matrix::filled(1, 1, -1.0));
        assert_eq!(t.log(x), Err(Error::Numeric { op: "log" }));
        let z = t.constant(Matrix::zeros(1, 2));
        let o = t.constant(Matrix::filled(1, 2, 1.0));
        assert!(t.cosine_similarity(z, o).unwrap_err().is_numeric());
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::new();
        let a = t.constant(Matrix::zeros(2, 3));
        assert!(matches!(t.matmul(a, a), Err(Error::Shape { .. })));
        let b = t.constant(Matrix::zeros(1, 2));
        assert!(t.add_row(a, b).is_err());
        assert!(t.segment_sum(a, Arc::from([0usize]), 1).is_err());
    }

    #[test]
    fn composite_gradchecks() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = rand_matrix(3, 4, &mut rng);
        let b = rand_matrix(4, 2, &mut rng);
        let r = gradcheck(&[a, b], |t, v| {
            let m = t.matmul(v[0], v[1])?;
            t.sum(m)
        })
        .unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");

        let logits = rand_matrix(4, 3, &mut rng);
        let r = gradcheck(&[logits], |t, v| {
            let p = t.softmax_rows(v[0])?;
            let l = t.log(p)?;
            let y = t.constant(Matrix::from_fn(4, 3, |i, j| if i % 3 == j { 1.0 } else { 0.0 }));
            let picked = t.mul(l, y)?;
            let s = t.mean(picked)?;
            t.scale(s, -1.0)
        })
        .unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");

        // relu inputs kept at least 0.1 away from the kink
        let x = Matrix::from_fn(3, 3, |i, j| if (i + j) % 2 == 0 { 0.5 + i as f64 } else { -0.3 - j as f64 });
        let r = gradcheck(&[x], |t, v| {
            let y = t.relu(v[0])?;
            let sq = t.mul(y, y)?;
            t.sum(sq)
        })
        .unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn gumbel_symmetric_and_saturated() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut t = Tape::new();
        let s = t.param(Matrix::zeros(100, 100));
        let theta = gumbel_softmax(&mut t, s, 1.0, &mut rng, true).unwrap();
        let vals = t.value(theta);
        assert!(vals.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
        let rate = vals.sum() / 1e4;
        assert!((rate - 0.5).abs() < 0.02, "{rate}");
        let total = t.sum(theta).unwrap();
        t.backward(total).unwrap();
        assert!(t.grad(s).unwrap().as_slice().iter().any(|&g| g != 0.0));

        let mut t = Tape::new();
        let s = t.constant(Matrix::filled(50, 50, 40.0));
        let theta = gumbel_softmax(&mut t, s, 0.5, &mut rng, true).unwrap();
        assert_eq!(t.value(theta).sum(), 2500.0);
        assert!(gumbel_softmax(&mut t, s, 0.0, &mut rng, true).is_err());
    }
}
