//! Reverse-mode differentiation over a recorded op list.
//!
//! Every value is a 2-D `f64` matrix; vectors are `1 x w` rows and scalars are
//! `1 x 1`. Ops append a node to the tape and return a [`Var`] handle. Calling
//! [`Tape::backward`] on a scalar walks the tape in reverse and accumulates
//! parameter gradients into the [`ParamStore`] the parameters came from.
//!
//! Conventions: ReLU has subgradient 0 at exactly 0. Every op output is
//! checked for non-finite entries and reports the op name on failure.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{s, Array2, Axis, Zip};
use rand::Rng as _;

use super::params::{ParamId, ParamStore};
use crate::error::{invalid, numeric, Result};
use crate::rng::Rng;

pub type Matrix = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// A fixed sparse linear map applied independently to consecutive row blocks.
///
/// An input with `B * cols_in` rows is viewed as `B` blocks of `cols_in`
/// rows; output block `b` is `M * input_block_b` where `M` is `rows_out x
/// cols_in`. This covers graph aggregation, node placement and readout.
///
/// Forward sums are taken in ascending value order so that the result
/// depends only on the multiset of terms, not on their positions.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    rows_out: usize,
    cols_in: usize,
    /// Per output row: (input row, weight), sorted by input row.
    rows: Vec<Vec<(usize, f64)>>,
}

impl BlockOperator {
    pub fn new(rows_out: usize, cols_in: usize, mut rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if rows.len() != rows_out {
            return invalid(format!(
                "block operator: {} row lists for {rows_out} output rows",
                rows.len()
            ));
        }
        for r in &mut rows {
            if r.iter().any(|&(c, _)| c >= cols_in) {
                return invalid("block operator: column index out of range");
            }
            r.sort_by_key(|&(c, _)| c);
        }
        Ok(Self {
            rows_out,
            cols_in,
            rows,
        })
    }

    pub fn rows_out(&self) -> usize {
        self.rows_out
    }

    pub fn cols_in(&self) -> usize {
        self.cols_in
    }

    pub fn entries(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    /// Dense `rows_out x cols_in` form, for tests and inspection.
    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros((self.rows_out, self.cols_in));
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, w) in row {
                m[[r, c]] += w;
            }
        }
        m
    }

    fn blocks_of(&self, rows: usize) -> Result<usize> {
        if self.cols_in == 0 || !rows.is_multiple_of(self.cols_in) {
            return invalid(format!(
                "block operator: {rows} input rows not a multiple of block size {}",
                self.cols_in
            ));
        }
        Ok(rows / self.cols_in)
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        let blocks = self.blocks_of(x.nrows())?;
        let width = x.ncols();
        let mut out = Matrix::zeros((blocks * self.rows_out, width));
        let mut terms: Vec<f64> = Vec::new();
        for b in 0..blocks {
            let base_in = b * self.cols_in;
            for (r, row) in self.rows.iter().enumerate() {
                let mut dst = out.row_mut(b * self.rows_out + r);
                match row.len() {
                    0 => {}
                    1 => {
                        let (c, w) = row[0];
                        dst.assign(&x.row(base_in + c));
                        dst.mapv_inplace(|v| v * w);
                    }
                    _ => {
                        for j in 0..width {
                            terms.clear();
                            terms.extend(row.iter().map(|&(c, w)| w * x[[base_in + c, j]]));
                            terms.sort_unstable_by(f64::total_cmp);
                            dst[j] = terms.iter().sum();
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn apply_transpose(&self, g: &Matrix) -> Result<Matrix> {
        if self.rows_out == 0 || !g.nrows().is_multiple_of(self.rows_out) {
            return invalid("block operator: gradient rows not a multiple of output block");
        }
        let blocks = g.nrows() / self.rows_out;
        let mut out = Matrix::zeros((blocks * self.cols_in, g.ncols()));
        for b in 0..blocks {
            for (r, row) in self.rows.iter().enumerate() {
                let src = g.row(b * self.rows_out + r);
                for &(c, w) in row {
                    let mut dst = out.row_mut(b * self.cols_in + c);
                    dst.scaled_add(w, &src);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// a * b^T
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    Affine(Var, f64),
    MulConst(Var, Matrix),
    Sparse(Var, Arc<BlockOperator>),
    Sum(Var),
    Mean(Var),
    SoftmaxRows(Var),
    Log(Var),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    RowCosine(Var, Var),
    CrossEntropy(Var, Vec<usize>),
    SquaredError(Var, Matrix),
    BlockMix(Var, Var),
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    dropout_rng: Option<Rng>,
}

fn check_finite(op: &str, m: &Matrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(numeric(op, "non-finite value in output"))
    }
}

fn same_shape(op: &str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.dim() != b.dim() {
        return invalid(format!("{op}: shape {:?} vs {:?}", a.dim(), b.dim()));
    }
    Ok(())
}

fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let total: f64 = row.sum();
        row.mapv_inplace(|v| v / total);
    }
    out
}

fn argmax_first(xs: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in xs.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    /// An evaluation tape: dropout is the identity.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
            dropout_rng: None,
        }
    }

    /// A training tape: dropout draws masks from `rng`.
    pub fn training(rng: Rng) -> Self {
        Self {
            dropout_rng: Some(rng),
            ..Self::new()
        }
    }

    pub fn is_training(&self) -> bool {
        self.dropout_rng.is_some()
    }

    /// Hands the dropout generator back so its state can carry across batches.
    pub fn into_rng(self) -> Option<Rng> {
        self.dropout_rng
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, name: &str, value: Matrix, op: Op, needs_grad: bool) -> Result<Var> {
        check_finite(name, &value)?;
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A constant input (no gradient).
    pub fn constant(&mut self, value: Matrix) -> Result<Var> {
        self.push("constant", value, Op::Leaf, false)
    }

    /// The tape leaf for a stored parameter; repeated calls return the same leaf.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Result<Var> {
        if let Some(&v) = self.params.get(&id) {
            return Ok(v);
        }
        let v = self.push("param", store.value(id).clone(), Op::Leaf, true)?;
        self.params.insert(id, v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.ncols() != y.nrows() {
            return invalid(format!("matmul: {:?} x {:?}", x.dim(), y.dim()));
        }
        let out = x.dot(y);
        let ng = self.ng(a) || self.ng(b);
        self.push("matmul", out, Op::MatMul(a, b), ng)
    }

    /// `a * b^T`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.ncols() != y.ncols() {
            return invalid(format!("matmul_t: {:?} x {:?}^T", x.dim(), y.dim()));
        }
        let out = x.dot(&y.t());
        let ng = self.ng(a) || self.ng(b);
        self.push("matmul_t", out, Op::MatMulT(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("add", self.value(a), self.value(b))?;
        let out = self.value(a) + self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push("add", out, Op::Add(a, b), ng)
    }

    /// Adds the `1 x w` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(b));
        if r.nrows() != 1 || r.ncols() != x.ncols() {
            return invalid(format!("add_row: {:?} + {:?}", x.dim(), r.dim()));
        }
        let out = x + r;
        let ng = self.ng(a) || self.ng(b);
        self.push("add_row", out, Op::AddRow(a, b), ng)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(|v| if v > 0.0 { v } else { 0.0 });
        let ng = self.ng(a);
        self.push("relu", out, Op::Relu(a), ng)
    }

    /// `scale * a + shift`
    pub fn affine(&mut self, a: Var, scale: f64, shift: f64) -> Result<Var> {
        let out = self.value(a).mapv(|v| scale * v + shift);
        let ng = self.ng(a);
        self.push("affine", out, Op::Affine(a, scale), ng)
    }

    /// Elementwise product with a constant matrix.
    pub fn mul_const(&mut self, a: Var, m: Matrix) -> Result<Var> {
        same_shape("mul_const", self.value(a), &m)?;
        let out = self.value(a) * &m;
        let ng = self.ng(a);
        self.push("mul_const", out, Op::MulConst(a, m), ng)
    }

    /// Inverted dropout. Identity on an evaluation tape or when `rate == 0`.
    pub fn dropout(&mut self, a: Var, rate: f64) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return invalid(format!("dropout rate {rate} outside [0, 1)"));
        }
        let Some(rng) = self.dropout_rng.as_mut() else {
            return Ok(a);
        };
        if rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 - rate;
        let dim = self.nodes[a.0].value.dim();
        let mask = Matrix::from_shape_simple_fn(dim, || {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        self.mul_const(a, mask)
    }

    pub fn sparse(&mut self, a: Var, op: &Arc<BlockOperator>) -> Result<Var> {
        let out = op.apply(self.value(a))?;
        let ng = self.ng(a);
        self.push("sparse", out, Op::Sparse(a, Arc::clone(op)), ng)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Matrix::from_elem((1, 1), self.value(a).sum());
        let ng = self.ng(a);
        self.push("sum", out, Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return invalid("mean of empty matrix");
        }
        let out = Matrix::from_elem((1, 1), x.sum() / x.len() as f64);
        let ng = self.ng(a);
        self.push("mean", out, Op::Mean(a), ng)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let out = softmax_rows(self.value(a));
        let ng = self.ng(a);
        self.push("softmax", out, Op::SoftmaxRows(a), ng)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).mapv(f64::ln);
        let ng = self.ng(a);
        self.push("log", out, Op::Log(a), ng)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return invalid("concat of zero parts");
        };
        let width = self.value(first).ncols();
        if parts.iter().any(|&p| self.value(p).ncols() != width) {
            return invalid("concat: column counts differ");
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| crate::error::IlseError::InvalidArgument(format!("concat: {e}")))?;
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push("concat", out, Op::ConcatRows(parts.to_vec()), ng)
    }

    pub fn gather_rows(&mut self, a: Var, rows: Vec<usize>) -> Result<Var> {
        let x = self.value(a);
        if rows.iter().any(|&r| r >= x.nrows()) {
            return invalid("gather_rows: row index out of range");
        }
        let out = x.select(Axis(0), &rows);
        let ng = self.ng(a);
        self.push("gather_rows", out, Op::GatherRows(a, rows), ng)
    }

    /// Contiguous row slice `[start, end)`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        self.gather_rows(a, (start..end).collect())
    }

    /// Cosine similarity of matching rows, as an `n x 1` column.
    pub fn row_cosine(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        same_shape("row_cosine", x, y)?;
        let mut out = Matrix::zeros((x.nrows(), 1));
        for (i, (u, v)) in x.rows().into_iter().zip(y.rows()).enumerate() {
            let (nu, nv) = (u.dot(&u).sqrt(), v.dot(&v).sqrt());
            if nu == 0.0 || nv == 0.0 {
                return Err(numeric("row_cosine", format!("zero-norm input in row {i}")));
            }
            out[[i, 0]] = u.dot(&v) / (nu * nv);
        }
        let ng = self.ng(a) || self.ng(b);
        self.push("row_cosine", out, Op::RowCosine(a, b), ng)
    }

    /// Mean over rows of `-log softmax(logits_i)[label_i]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: Vec<usize>) -> Result<Var> {
        let x = self.value(logits);
        if x.ncols() < 2 {
            return invalid("cross_entropy: need at least two classes");
        }
        if labels.len() != x.nrows() {
            return invalid("cross_entropy: one label per row required");
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= x.ncols()) {
            return invalid(format!("cross_entropy: label {bad} >= {} classes", x.ncols()));
        }
        let mut total = 0.0;
        for (row, &label) in x.rows().into_iter().zip(&labels) {
            // log-sum-exp relative to the max entry, via ln_1p over the others
            let top = argmax_first(row.iter().copied());
            let max = row[top];
            let rest: f64 = row.iter().enumerate().filter(|&(j, _)| j != top).map(|(_, v)| (v - max).exp()).sum();
            total += rest.ln_1p() - (row[label] - max);
        }
        let out = Matrix::from_elem((1, 1), total / labels.len() as f64);
        let ng = self.ng(logits);
        self.push("cross_entropy", out, Op::CrossEntropy(logits, labels), ng)
    }

    /// Mean of `(a - target)^2` over all entries.
    pub fn squared_error(&mut self, a: Var, target: Matrix) -> Result<Var> {
        let x = self.value(a);
        same_shape("squared_error", x, &target)?;
        let out = Matrix::from_elem((1, 1), (x - &target).mapv(|v| v * v).mean().unwrap_or(0.0));
        let ng = self.ng(a);
        self.push("squared_error", out, Op::SquaredError(a, target), ng)
    }

    /// Per-block weighted row sum: `out[b] = sum_l weights[b, l] * values[b * L + l]`.
    pub fn block_mix(&mut self, weights: Var, values: Var) -> Result<Var> {
        let (w, v) = (self.value(weights), self.value(values));
        let (blocks, per) = w.dim();
        if blocks * per != v.nrows() {
            return invalid(format!("block_mix: weights {:?} vs values {:?}", w.dim(), v.dim()));
        }
        let mut out = Matrix::zeros((blocks, v.ncols()));
        for b in 0..blocks {
            let mut dst = out.row_mut(b);
            for l in 0..per {
                dst.scaled_add(w[[b, l]], &v.row(b * per + l));
            }
        }
        let ng = self.ng(weights) || self.ng(values);
        self.push("block_mix", out, Op::BlockMix(weights, values), ng)
    }

    /// Backpropagates from the scalar `loss` and adds parameter gradients into `store`.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        if self.value(loss).dim() != (1, 1) {
            return invalid("backward: loss must be 1 x 1");
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::ones((1, 1)));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }

        for (&id, &v) in &self.params {
            if let Some(g) = &grads[v.0] {
                check_finite("backward", g)?;
                store.accumulate_grad(id, g)?;
            }
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Matrix, grads: &mut [Option<Matrix>]) -> Result<()> {
        let mut acc = |v: Var, delta: Matrix| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += &delta,
                slot @ None => *slot = Some(delta),
            }
        };
        let out = &self.nodes[idx].value;
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.ng(*a) {
                    acc(*a, g.dot(&self.value(*b).t()));
                }
                if self.ng(*b) {
                    acc(*b, self.value(*a).t().dot(g));
                }
            }
            Op::MatMulT(a, b) => {
                if self.ng(*a) {
                    acc(*a, g.dot(self.value(*b)));
                }
                if self.ng(*b) {
                    acc(*b, g.t().dot(self.value(*a)));
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::AddRow(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Relu(a) => {
                let mut d = g.clone();
                Zip::from(&mut d)
                    .and(self.value(*a))
                    .for_each(|d, &x| if x <= 0.0 { *d = 0.0 });
                acc(*a, d);
            }
            Op::Affine(a, scale) => acc(*a, g * *scale),
            Op::MulConst(a, m) => acc(*a, g * m),
            Op::Sparse(a, op) => acc(*a, op.apply_transpose(g)?),
            Op::Sum(a) => acc(*a, Matrix::from_elem(self.value(*a).dim(), g[[0, 0]])),
            Op::Mean(a) => {
                let x = self.value(*a);
                acc(*a, Matrix::from_elem(x.dim(), g[[0, 0]] / x.len() as f64));
            }
            Op::SoftmaxRows(a) => {
                let mut d = out * g;
                let dots = d.sum_axis(Axis(1));
                for (mut row, (y, dot)) in d.rows_mut().into_iter().zip(out.rows().into_iter().zip(&dots)) {
                    row.scaled_add(-dot, &y);
                }
                acc(*a, d);
            }
            Op::Log(a) => acc(*a, g / self.value(*a)),
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let rows = self.value(p).nrows();
                    acc(p, g.slice(s![start..start + rows, ..]).to_owned());
                    start += rows;
                }
            }
            Op::GatherRows(a, rows) => {
                let mut d = Matrix::zeros(self.value(*a).dim());
                for (i, &r) in rows.iter().enumerate() {
                    let mut dst = d.row_mut(r);
                    dst += &g.row(i);
                }
                acc(*a, d);
            }
            Op::RowCosine(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let mut da = Matrix::zeros(x.dim());
                let mut db = Matrix::zeros(y.dim());
                for i in 0..x.nrows() {
                    let (u, v) = (x.row(i), y.row(i));
                    let (nu, nv) = (u.dot(&u).sqrt(), v.dot(&v).sqrt());
                    let c = out[[i, 0]];
                    let gi = g[[i, 0]];
                    // dc/du = v / (|u||v|) - c u / |u|^2
                    let mut ra = da.row_mut(i);
                    ra.scaled_add(gi / (nu * nv), &v);
                    ra.scaled_add(-gi * c / (nu * nu), &u);
                    let mut rb = db.row_mut(i);
                    rb.scaled_add(gi / (nu * nv), &u);
                    rb.scaled_add(-gi * c / (nv * nv), &v);
                }
                acc(*a, da);
                acc(*b, db);
            }
            Op::CrossEntropy(logits, labels) => {
                let mut d = softmax_rows(self.value(*logits));
                for (i, &l) in labels.iter().enumerate() {
                    d[[i, l]] -= 1.0;
                }
                d *= g[[0, 0]] / labels.len() as f64;
                acc(*logits, d);
            }
            Op::SquaredError(a, target) => {
                let x = self.value(*a);
                acc(*a, (x - target) * (2.0 * g[[0, 0]] / x.len() as f64));
            }
            Op::BlockMix(w, v) => {
                let (wm, vm) = (self.value(*w), self.value(*v));
                let (blocks, per) = wm.dim();
                if self.ng(*w) {
                    let mut dw = Matrix::zeros(wm.dim());
                    for b in 0..blocks {
                        for l in 0..per {
                            dw[[b, l]] = g.row(b).dot(&vm.row(b * per + l));
                        }
                    }
                    acc(*w, dw);
                }
                if self.ng(*v) {
                    let mut dv = Matrix::zeros(vm.dim());
                    for b in 0..blocks {
                        for l in 0..per {
                            dv.row_mut(b * per + l).scaled_add(wm[[b, l]], &g.row(b));
                        }
                    }
                    acc(*v, dv);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sum_of_matmul_gradient_is_outer_structure() {
        // loss = sum(x W) with W zero: dL/dW[i, j] = sum over rows of x[r, i]
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::zeros((3, 2))).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(array![[1.0, 2.0, 3.0]]).unwrap();
        let wv = tape.param(&store, w).unwrap();
        let y = tape.matmul(x, wv).unwrap();
        let loss = tape.sum(y).unwrap();
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(w), &array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]);
    }

    #[test]
    fn relu_at_zero_has_zero_subgradient() {
        let mut store = ParamStore::new();
        let p = store.add("p", array![[0.0, 1.0, -1.0]]).unwrap();
        let mut tape = Tape::new();
        let v = tape.param(&store, p).unwrap();
        let r = tape.relu(v).unwrap();
        let loss = tape.sum(r).unwrap();
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.grad(p), &array![[0.0, 1.0, 0.0]]);
    }

    #[test]
    fn shape_mismatch_is_invalid_argument() {
        let mut tape = Tape::new();
        let a = tape.constant(Matrix::zeros((2, 3))).unwrap();
        let b = tape.constant(Matrix::zeros((2, 3))).unwrap();
        assert!(matches!(
            tape.matmul(a, b),
            Err(crate::error::IlseError::InvalidArgument(_))
        ));
    }

    #[test]
    fn nan_reports_op_name() {
        let mut tape = Tape::new();
        let a = tape.constant(array![[-1.0]]).unwrap();
        match tape.log(a) {
            Err(crate::error::IlseError::NumericFailure { op, .. }) => assert_eq!(op, "log"),
            other => panic!("expected numeric failure, got {other:?}"),
        }
    }

    #[test]
    fn dropout_is_identity_in_evaluation() {
        let mut tape = Tape::new();
        let a = tape.constant(array![[1.0, 2.0]]).unwrap();
        let d = tape.dropout(a, 0.3).unwrap();
        assert_eq!(a, d);
    }

    #[test]
    fn dropout_scales_kept_units() {
        let mut tape = Tape::training(crate::rng::stream(1, crate::rng::Stream::Dropout));
        let a = tape.constant(Matrix::ones((20, 20))).unwrap();
        let d = tape.dropout(a, 0.25).unwrap();
        let vals = tape.value(d);
        assert!(vals.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-15));
        assert!(vals.iter().any(|&v| v == 0.0));
    }

    #[test]
    fn block_operator_sum_ignores_term_order() {
        let op = BlockOperator::new(1, 3, vec![vec![(0, 1.0), (1, 1.0), (2, 1.0)]]).unwrap();
        let a = array![[1e16], [1.0], [-1e16]];
        let b = array![[-1e16], [1e16], [1.0]];
        assert_eq!(op.apply(&a).unwrap(), op.apply(&b).unwrap());
    }

    #[test]
    fn block_operator_matches_dense_per_block() {
        let op = BlockOperator::new(2, 3, vec![vec![(0, 0.5), (2, 2.0)], vec![(1, -1.0)]]).unwrap();
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0], [9.0, 10.0], [11.0, 12.0]];
        let out = op.apply(&x).unwrap();
        let dense = op.to_dense();
        let top = dense.dot(&x.slice(s![0..3, ..]));
        let bottom = dense.dot(&x.slice(s![3..6, ..]));
        assert_eq!(out.slice(s![0..2, ..]), top);
        assert_eq!(out.slice(s![2..4, ..]), bottom);
    }
}
