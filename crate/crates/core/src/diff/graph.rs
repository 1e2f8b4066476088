//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Graph`] records every operation applied during a forward pass as a
//! node that owns its output value. Nodes are appended in evaluation order,
//! so walking them backwards is a valid reverse topological order.
//! [`Graph::backward`] leaves the graph untouched and returns the gradients in
//! a separate [`Gradients`] table; calling it twice gives identical results.

use super::tensor::{gemm, Tensor};
use crate::error::{dim_err, Error, Result};

/// Negative slope used by every LeakyReLU in the crate.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Handle to a node inside a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MatMul(Var, Var),
    BlockMatMul { weights: Var, states: Var, blocks: usize },
    GatherRows(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
    SliceCols { input: Var, start: usize },
    Affine { input: Var, scale: f64 },
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    OuterAdd(Var, Var),
    MaskedSoftmax { input: Var, mask: Vec<bool> },
    Sum(Var),
    MaeLoss { pred: Var, target: Tensor },
}

impl Op {
    fn tag(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddRow(..) => "add_row",
            Op::MatMul(..) => "matmul",
            Op::BlockMatMul { .. } => "block_matmul",
            Op::GatherRows(..) => "gather_rows",
            Op::ConcatCols(..) => "concat",
            Op::SliceCols { .. } => "slice_cols",
            Op::Affine { .. } => "affine",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::OuterAdd(..) => "outer_add",
            Op::MaskedSoftmax { .. } => "softmax",
            Op::Sum(..) => "sum",
            Op::MaeLoss { .. } => "mae_loss",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Computation graph for one forward/backward pass.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    first_non_finite: Option<&'static str>,
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

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        if self.first_non_finite.is_none() && !value.is_finite() {
            self.first_non_finite = Some(op.tag());
        }
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    /// Leaf node: a parameter or a constant input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Fails with the tag of the first operation that produced NaN or Inf.
    pub fn check_finite(&self) -> Result<()> {
        match self.first_non_finite {
            Some(op) => Err(Error::NumericFailure { op }),
            None => Ok(()),
        }
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.same_shape(tb) {
            Ok(())
        } else {
            dim_err(
                op,
                format!("[{}x{}] vs [{}x{}]", ta.rows(), ta.cols(), tb.rows(), tb.cols()),
            )
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        Ok(self.push(Op::Sub(a, b), v))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), v))
    }

    /// Adds a `1 x c` row to every row of an `r x c` matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (tx, tr) = (self.value(x), self.value(row));
        if tr.rows() != 1 || tr.cols() != tx.cols() {
            return dim_err(
                "add_row",
                format!("row [{}x{}] vs input width {}", tr.rows(), tr.cols(), tx.cols()),
            );
        }
        let c = tx.cols();
        let mut v = tx.clone();
        for (i, out) in v.data_mut().iter_mut().enumerate() {
            *out += tr.data()[i % c];
        }
        Ok(self.push(Op::AddRow(x, row), v))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    /// Applies an `m x m` weight matrix to each of the `blocks` consecutive
    /// `m`-row blocks of `states` (a block-diagonal product).
    pub fn block_matmul(&mut self, weights: Var, states: Var, blocks: usize) -> Result<Var> {
        let (tw, ts) = (self.value(weights), self.value(states));
        let m = tw.rows();
        if tw.cols() != m || blocks == 0 || ts.rows() != m * blocks {
            return dim_err(
                "block_matmul",
                format!(
                    "weights [{}x{}], states [{}x{}], {blocks} blocks",
                    tw.rows(),
                    tw.cols(),
                    ts.rows(),
                    ts.cols()
                ),
            );
        }
        let d = ts.cols();
        let mut out = vec![0.0; ts.len()];
        for b in 0..blocks {
            let span = b * m * d..(b + 1) * m * d;
            block_gemm(tw.data(), false, m, &ts.data()[span.clone()], d, &mut out[span]);
        }
        let v = Tensor::matrix(m * blocks, d, out)?;
        Ok(self.push(Op::BlockMatMul { weights, states, blocks }, v))
    }

    pub fn gather_rows(&mut self, x: Var, rows: Vec<usize>) -> Result<Var> {
        let tx = self.value(x);
        let c = tx.cols();
        let mut out = Vec::with_capacity(rows.len() * c);
        for &r in &rows {
            if r >= tx.rows() {
                return dim_err("gather_rows", format!("row {r} out of {}", tx.rows()));
            }
            out.extend_from_slice(tx.row_slice(r));
        }
        let v = Tensor::matrix(rows.len(), c, out)?;
        Ok(self.push(Op::GatherRows(x, rows), v))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return dim_err("concat", "no inputs");
        };
        let r = self.value(first).rows();
        if parts.iter().any(|&p| self.value(p).rows() != r) {
            return dim_err("concat", "row counts differ");
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = vec![0.0; r * total];
        let mut offset = 0;
        for &p in parts {
            let t = self.value(p);
            let c = t.cols();
            for i in 0..r {
                out[i * total + offset..i * total + offset + c].copy_from_slice(t.row_slice(i));
            }
            offset += c;
        }
        let v = Tensor::matrix(r, total, out)?;
        Ok(self.push(Op::ConcatCols(parts.to_vec()), v))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let tx = self.value(x);
        if start + len > tx.cols() {
            return dim_err("slice_cols", format!("{start}+{len} > {}", tx.cols()));
        }
        let r = tx.rows();
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&tx.row_slice(i)[start..start + len]);
        }
        let v = Tensor::matrix(r, len, out)?;
        Ok(self.push(Op::SliceCols { input: x, start }, v))
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let v = self.value(x).map(|a| scale * a + shift);
        self.push(Op::Affine { input: x, scale }, v)
    }

    pub fn leaky_relu(&mut self, x: Var) -> Var {
        self.leaky_relu_with(x, LEAKY_SLOPE)
    }

    pub fn leaky_relu_with(&mut self, x: Var, slope: f64) -> Var {
        let v = self.value(x).map(|a| if a > 0.0 { a } else { slope * a });
        self.push(Op::LeakyRelu(x, slope), v)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).map(sigmoid);
        self.push(Op::Sigmoid(x), v)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let v = self.value(x).map(f64::tanh);
        self.push(Op::Tanh(x), v)
    }

    /// `out[i][j] = rows[i] + cols[j]` for two `m x 1` columns.
    pub fn outer_add(&mut self, rows: Var, cols: Var) -> Result<Var> {
        let (a, b) = (self.value(rows), self.value(cols));
        if a.cols() != 1 || b.cols() != 1 {
            return dim_err("outer_add", "inputs must be column vectors");
        }
        let (m, n) = (a.rows(), b.rows());
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                out.push(a.data()[i] + b.data()[j]);
            }
        }
        let v = Tensor::matrix(m, n, out)?;
        Ok(self.push(Op::OuterAdd(rows, cols), v))
    }

    /// Row-wise softmax over the entries where `mask` is true; masked-out
    /// entries are exactly zero. Every row must keep at least one entry.
    pub fn masked_softmax_rows(&mut self, x: Var, mask: Vec<bool>) -> Result<Var> {
        let tx = self.value(x);
        if mask.len() != tx.len() {
            return dim_err("softmax", format!("mask {} vs {} values", mask.len(), tx.len()));
        }
        let (r, c) = (tx.rows(), tx.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &tx.data()[i * c..(i + 1) * c];
            let keep = &mask[i * c..(i + 1) * c];
            let max = row
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(&v, _)| v)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::Contract(format!("softmax row {i} has no unmasked entry")));
            }
            let mut total = 0.0;
            for j in 0..c {
                if keep[j] {
                    let e = (row[j] - max).exp();
                    out[i * c + j] = e;
                    total += e;
                }
            }
            for v in &mut out[i * c..(i + 1) * c] {
                *v /= total;
            }
        }
        let v = Tensor::matrix(r, c, out)?;
        Ok(self.push(Op::MaskedSoftmax { input: x, mask }, v))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let v = Tensor::scalar(self.value(x).sum());
        self.push(Op::Sum(x), v)
    }

    /// Mean absolute error against a constant target.
    pub fn mae_loss(&mut self, pred: Var, target: Tensor) -> Result<Var> {
        let tp = self.value(pred);
        if !tp.same_shape(&target) {
            return dim_err(
                "mae_loss",
                format!("[{}x{}] vs target [{}x{}]", tp.rows(), tp.cols(), target.rows(), target.cols()),
            );
        }
        let n = tp.len().max(1) as f64;
        let loss: f64 =
            tp.data().iter().zip(target.data()).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
        Ok(self.push(Op::MaeLoss { pred, target }, Tensor::scalar(loss)))
    }

    /// Reverse-mode sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got [{}x{}]",
                lv.rows(),
                lv.cols()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::filled(lv.rows(), lv.cols(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, delta: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&delta),
            slot @ None => *slot = Some(delta),
        };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                acc(*a, g.zip_map(self.value(*b), |x, y| x * y));
                acc(*b, g.zip_map(self.value(*a), |x, y| x * y));
            }
            Op::AddRow(x, row) => {
                let c = g.cols();
                let mut gr = vec![0.0; c];
                for (i, v) in g.data().iter().enumerate() {
                    gr[i % c] += v;
                }
                acc(*x, g.clone());
                acc(*row, Tensor::row(gr));
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let mut ga = Tensor::zeros(ta.rows(), ta.cols());
                gemm(g, false, tb, true, &mut ga, 0.0);
                let mut gb = Tensor::zeros(tb.rows(), tb.cols());
                gemm(ta, true, g, false, &mut gb, 0.0);
                acc(*a, ga);
                acc(*b, gb);
            }
            Op::BlockMatMul { weights, states, blocks } => {
                let (tw, ts) = (self.value(*weights), self.value(*states));
                let m = tw.rows();
                let d = ts.cols();
                let mut gw = vec![0.0; m * m];
                let mut gs = vec![0.0; ts.len()];
                for b in 0..*blocks {
                    let span = b * m * d..(b + 1) * m * d;
                    // dW += dOut_b * S_b^T
                    accumulate_outer(&g.data()[span.clone()], &ts.data()[span.clone()], m, d, &mut gw);
                    // dS_b = W^T * dOut_b
                    block_gemm(tw.data(), true, m, &g.data()[span.clone()], d, &mut gs[span]);
                }
                acc(*weights, Tensor::matrix(m, m, gw).expect("shape"));
                acc(*states, Tensor::matrix(ts.rows(), d, gs).expect("shape"));
            }
            Op::GatherRows(x, rows) => {
                let tx = self.value(*x);
                let c = tx.cols();
                let mut gx = Tensor::zeros(tx.rows(), c);
                for (k, &r) in rows.iter().enumerate() {
                    for j in 0..c {
                        gx.data_mut()[r * c + j] += g.data()[k * c + j];
                    }
                }
                acc(*x, gx);
            }
            Op::ConcatCols(parts) => {
                let total = g.cols();
                let r = g.rows();
                let mut offset = 0;
                for &p in parts {
                    let c = self.value(p).cols();
                    let mut gp = Vec::with_capacity(r * c);
                    for i in 0..r {
                        gp.extend_from_slice(&g.data()[i * total + offset..i * total + offset + c]);
                    }
                    acc(p, Tensor::matrix(r, c, gp).expect("shape"));
                    offset += c;
                }
            }
            Op::SliceCols { input, start } => {
                let tx = self.value(*input);
                let (r, c, len) = (tx.rows(), tx.cols(), g.cols());
                let mut gx = Tensor::zeros(r, c);
                for i in 0..r {
                    gx.data_mut()[i * c + start..i * c + start + len]
                        .copy_from_slice(&g.data()[i * len..(i + 1) * len]);
                }
                acc(*input, gx);
            }
            Op::Affine { input, scale } => acc(*input, g.map(|x| x * scale)),
            Op::LeakyRelu(x, slope) => {
                let gx = g.zip_map(self.value(*x), |gv, xv| if xv > 0.0 { gv } else { gv * slope });
                acc(*x, gx);
            }
            Op::Sigmoid(x) => {
                let gx = g.zip_map(&node.value, |gv, y| gv * y * (1.0 - y));
                acc(*x, gx);
            }
            Op::Tanh(x) => {
                let gx = g.zip_map(&node.value, |gv, y| gv * (1.0 - y * y));
                acc(*x, gx);
            }
            Op::OuterAdd(rows, cols) => {
                let (m, n) = (g.rows(), g.cols());
                let mut gr = vec![0.0; m];
                let mut gc = vec![0.0; n];
                for i in 0..m {
                    for j in 0..n {
                        let v = g.data()[i * n + j];
                        gr[i] += v;
                        gc[j] += v;
                    }
                }
                acc(*rows, Tensor::column(gr));
                acc(*cols, Tensor::column(gc));
            }
            Op::MaskedSoftmax { input, mask } => {
                let y = &node.value;
                let (r, c) = (y.rows(), y.cols());
                let mut gx = Tensor::zeros(r, c);
                for i in 0..r {
                    let span = i * c..(i + 1) * c;
                    let dot: f64 = g.data()[span.clone()]
                        .iter()
                        .zip(&y.data()[span.clone()])
                        .map(|(a, b)| a * b)
                        .sum();
                    for j in span {
                        if mask[j] {
                            gx.data_mut()[j] = y.data()[j] * (g.data()[j] - dot);
                        }
                    }
                }
                acc(*input, gx);
            }
            Op::Sum(x) => {
                let tx = self.value(*x);
                acc(*x, Tensor::filled(tx.rows(), tx.cols(), g.item()));
            }
            Op::MaeLoss { pred, target } => {
                let tp = self.value(*pred);
                let n = tp.len().max(1) as f64;
                let scale = g.item() / n;
                // Subgradient of |.| at zero is taken as zero.
                let gp = tp.zip_map(target, |p, t| {
                    let d = p - t;
                    if d > 0.0 {
                        scale
                    } else if d < 0.0 {
                        -scale
                    } else {
                        0.0
                    }
                });
                acc(*pred, gp);
            }
        }
    }
}

/// Gradient table returned by [`Graph::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros when `v` does not
    /// influence the loss.
    pub fn wrt(&self, graph: &Graph, v: Var) -> Tensor {
        match self.grads.get(v.0).and_then(|g| g.as_ref()) {
            Some(g) => g.clone(),
            None => Tensor::zeros_like(graph.value(v)),
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `out = W' * S` for an `m x m` weight and an `m x d` block, where `'` is an
/// optional transpose. `out` is overwritten.
fn block_gemm(w: &[f64], transpose: bool, m: usize, s: &[f64], d: usize, out: &mut [f64]) {
    let (rsw, csw) = if transpose { (1, m as isize) } else { (m as isize, 1) };
    // SAFETY: `w` is m*m, `s` and `out` are m*d, all row-major and disjoint.
    unsafe {
        matrixmultiply::dgemm(
            m,
            m,
            d,
            1.0,
            w.as_ptr(),
            rsw,
            csw,
            s.as_ptr(),
            d as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            d as isize,
            1,
        );
    }
}

/// `acc += a * b^T` for two `m x d` row-major blocks.
fn accumulate_outer(a: &[f64], b: &[f64], m: usize, d: usize, acc: &mut [f64]) {
    // SAFETY: `a`, `b` are m*d, `acc` is m*m; no aliasing.
    unsafe {
        matrixmultiply::dgemm(
            m,
            d,
            m,
            1.0,
            a.as_ptr(),
            d as isize,
            1,
            b.as_ptr(),
            1,
            d as isize,
            1.0,
            acc.as_mut_ptr(),
            m as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_form_gradient_is_input() {
        let mut g = Graph::new();
        let w = g.leaf(Tensor::row(vec![0.5, -1.0, 2.0]));
        let x = g.leaf(Tensor::row(vec![3.0, 4.0, 5.0]));
        let p = g.mul(w, x).unwrap();
        let loss = g.sum(p);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.wrt(&g, w).data(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn mae_gradient_positive_side() {
        let mut g = Graph::new();
        let p = g.leaf(Tensor::row(vec![2.0, 3.0, 4.0, 5.0]));
        let loss = g.mae_loss(p, Tensor::row(vec![1.0, 1.0, 1.0, 1.0])).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.wrt(&g, p).data(), &[0.25; 4]);
    }

    #[test]
    fn mae_subgradient_at_zero() {
        let mut g = Graph::new();
        let p = g.leaf(Tensor::row(vec![1.0, 2.0]));
        let loss = g.mae_loss(p, Tensor::row(vec![1.0, 1.0])).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.wrt(&g, p).data(), &[0.0, 0.5]);
    }

    #[test]
    fn loss_grad_is_one_and_unused_leaf_zero() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::row(vec![1.0, 2.0]));
        let unused = g.leaf(Tensor::row(vec![7.0]));
        let loss = g.sum(a);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.wrt(&g, loss).data(), &[1.0]);
        assert_eq!(grads.wrt(&g, unused).data(), &[0.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::row(vec![1.0, 2.0]));
        assert!(matches!(g.backward(a), Err(Error::Contract(_))));
    }

    #[test]
    fn softmax_rows_sum_to_one_with_mask() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.0, 10.0]).unwrap());
        let mask = vec![false, true, true, true, false, true];
        let y = g.masked_softmax_rows(x, mask).unwrap();
        let v = g.value(y);
        assert_eq!(v.get(0, 0), 0.0);
        assert_eq!(v.get(1, 1), 0.0);
        for r in 0..2 {
            assert!((v.row_slice(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nan_is_reported_with_op_tag() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::row(vec![f64::MAX]));
        let b = g.affine(a, 10.0, 0.0);
        let _ = g.tanh(b);
        match g.check_finite() {
            Err(Error::NumericFailure { op }) => assert_eq!(op, "affine"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn backward_is_repeatable() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::matrix(2, 2, vec![0.3, -0.2, 0.9, 0.1]).unwrap());
        let b = g.leaf(Tensor::matrix(2, 2, vec![1.3, 0.2, -0.4, 0.5]).unwrap());
        let c = g.matmul(a, b).unwrap();
        let s = g.sigmoid(c);
        let loss = g.sum(s);
        let g1 = g.backward(loss).unwrap();
        let g2 = g.backward(loss).unwrap();
        assert_eq!(g1.wrt(&g, a), g2.wrt(&g, a));
        assert_eq!(g1.wrt(&g, b), g2.wrt(&g, b));
    }
}
