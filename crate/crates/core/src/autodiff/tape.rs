use std::sync::Arc;

use rand::Rng;

use super::matrix::{gemm, Matrix};
use crate::sparse::{CsrMatrix, SparseStack};
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Spmm(Arc<CsrMatrix>, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    Blend {
        weight: Var,
        fresh: Var,
        extra: Option<(Var, f64)>,
        history: Var,
    },
    Relu(Var),
    Sigmoid(Var),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    Dropout {
        input: Var,
        keep: Vec<bool>,
        scale: f64,
    },
    RowSoftmax(Var),
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
    },
    Sum(Var),
    SparseAffineRelu {
        terms: Vec<(Arc<CsrMatrix>, Var)>,
        bias: Option<Var>,
    },
    StackAggregate {
        weights: Var,
        stack: Arc<SparseStack>,
        dense: Var,
        combined: Vec<f64>,
        inv_sqrt_deg: Vec<f64>,
        normalized: CsrMatrix,
    },
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Records a forward computation so that [`Tape::backward`] can replay it in
/// reverse. Every operation validates shapes and rejects non-finite results.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn check_same(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn check_scalar(op: &'static str, m: &Matrix) -> Result<()> {
    if m.shape() != (1, 1) {
        return Err(Error::shape(op, format!("expected 1x1 weight, got {:?}", m.shape())));
    }
    Ok(())
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, name: &'static str, value: Matrix, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records an input or parameter.
    pub fn leaf(&mut self, value: Matrix) -> Result<Var> {
        self.push("leaf", value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push("matmul", value, Op::MatMul(a, b))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.cols() {
            return Err(Error::shape("matmul_nt", format!("{:?} x {:?}^T", va.shape(), vb.shape())));
        }
        let mut value = Matrix::zeros(va.rows(), vb.rows());
        gemm(va, false, vb, true, 0.0, &mut value);
        self.push("matmul_nt", value, Op::MatMulNt(a, b))
    }

    /// Constant sparse matrix times a recorded dense value.
    pub fn spmm(&mut self, s: &Arc<CsrMatrix>, d: Var) -> Result<Var> {
        let value = s.spmm(self.value(d))?;
        self.push("spmm", value, Op::Spmm(Arc::clone(s), d))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same("add", self.value(a), self.value(b))?;
        let mut value = self.value(a).clone();
        value.add_scaled(self.value(b), 1.0);
        self.push("add", value, Op::Add(a, b))
    }

    /// Adds a `1 x cols` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (vx, vr) = (self.value(x), self.value(row));
        if vr.rows() != 1 || vr.cols() != vx.cols() {
            return Err(Error::shape("add_row", format!("{:?} + row {:?}", vx.shape(), vr.shape())));
        }
        let mut value = vx.clone();
        let b = vr.row(0).to_vec();
        for r in 0..value.rows() {
            for (o, bv) in value.row_mut(r).iter_mut().zip(&b) {
                *o += bv;
            }
        }
        self.push("add_row", value, Op::AddRow(x, row))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same("hadamard", self.value(a), self.value(b))?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.as_slice().iter().zip(vb.as_slice()).map(|(x, y)| x * y).collect();
        let value = Matrix::new(va.rows(), va.cols(), data)?;
        self.push("hadamard", value, Op::Hadamard(a, b))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let value = self.value(x).map(|v| v * factor);
        self.push("scale", value, Op::Scale(x, factor))
    }

    /// Multiplies `x` by the recorded `1 x 1` value `s`.
    pub fn scale_by(&mut self, s: Var, x: Var) -> Result<Var> {
        check_scalar("scale_by", self.value(s))?;
        let f = self.value(s).get(0, 0);
        let value = self.value(x).map(|v| v * f);
        self.push("scale_by", value, Op::ScaleBy(s, x))
    }

    /// `w · (fresh + c · extra) + (1 − w) · history` for a recorded `1 x 1`
    /// weight `w`.
    pub fn blend(
        &mut self,
        weight: Var,
        fresh: Var,
        extra: Option<(Var, f64)>,
        history: Var,
    ) -> Result<Var> {
        check_scalar("blend", self.value(weight))?;
        check_same("blend", self.value(fresh), self.value(history))?;
        if let Some((e, _)) = extra {
            check_same("blend", self.value(fresh), self.value(e))?;
        }
        let w = self.value(weight).get(0, 0);
        let mut value = self.value(fresh).map(|v| w * v);
        if let Some((e, c)) = extra {
            value.add_scaled(self.value(e), w * c);
        }
        value.add_scaled(self.value(history), 1.0 - w);
        self.push(
            "blend",
            value,
            Op::Blend {
                weight,
                fresh,
                extra,
                history,
            },
        )
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push("relu", value, Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(|v| 1.0 / (1.0 + (-v).exp()));
        self.push("sigmoid", value, Op::Sigmoid(x))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat_cols of nothing".into()))?;
        let rows = self.value(*first).rows();
        if let Some(bad) = parts.iter().find(|p| self.value(**p).rows() != rows) {
            return Err(Error::shape(
                "concat_cols",
                format!("{} rows vs {}", self.value(*bad).rows(), rows),
            ));
        }
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(r));
            }
        }
        let value = Matrix::new(rows, cols, data)?;
        self.push("concat_cols", value, Op::ConcatCols(parts.to_vec()))
    }

    pub fn gather_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let vx = self.value(x);
        if let Some(&bad) = rows.iter().find(|&&r| r >= vx.rows()) {
            return Err(Error::InvalidArgument(format!(
                "row {bad} out of range for {} rows",
                vx.rows()
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * vx.cols());
        for &r in rows {
            data.extend_from_slice(vx.row(r));
        }
        let value = Matrix::new(rows.len(), vx.cols(), data)?;
        self.push("gather_rows", value, Op::GatherRows(x, rows.to_vec()))
    }

    /// Inverted dropout. Outside training (or with `p == 0`) this returns `x`
    /// itself.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, train: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("dropout rate {p} outside [0, 1)")));
        }
        if !train || p == 0.0 {
            return Ok(x);
        }
        let scale = 1.0 / (1.0 - p);
        let vx = self.value(x);
        let keep: Vec<bool> = (0..vx.len()).map(|_| rng.gen::<f64>() >= p).collect();
        let data = vx
            .as_slice()
            .iter()
            .zip(&keep)
            .map(|(&v, &k)| if k { v * scale } else { 0.0 })
            .collect();
        let value = Matrix::new(vx.rows(), vx.cols(), data)?;
        self.push("dropout", value, Op::Dropout { input: x, keep, scale })
    }

    pub fn row_softmax(&mut self, x: Var) -> Result<Var> {
        let value = row_softmax_of(self.value(x));
        self.push("row_softmax", value, Op::RowSoftmax(x))
    }

    /// Mean negative log-likelihood of `labels` under `softmax(logits)`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let vl = self.value(logits);
        if labels.is_empty() {
            return Err(Error::InvalidArgument("cross_entropy with no labels".into()));
        }
        if labels.len() != vl.rows() {
            return Err(Error::shape(
                "cross_entropy",
                format!("{} labels for {} rows", labels.len(), vl.rows()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= vl.cols()) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range")));
        }
        let mut total = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = vl.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[label];
        }
        let value = Matrix::scalar(total / labels.len() as f64);
        self.push(
            "cross_entropy",
            value,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
            },
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = Matrix::scalar(self.value(x).sum());
        self.push("sum", value, Op::Sum(x))
    }

    /// `relu(Σ_k S_k · X_k + bias)` for constant sparse `S_k`.
    pub fn sparse_affine_relu(
        &mut self,
        terms: &[(Arc<CsrMatrix>, Var)],
        bias: Option<Var>,
    ) -> Result<Var> {
        let (s0, x0) = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("sparse_affine_relu of nothing".into()))?;
        let mut value = s0.spmm(self.value(*x0))?;
        for (s, x) in &terms[1..] {
            let part = s.spmm(self.value(*x))?;
            check_same("sparse_affine_relu", &value, &part)?;
            value.add_scaled(&part, 1.0);
        }
        if let Some(b) = bias {
            let vb = self.value(b);
            if vb.rows() != 1 || vb.cols() != value.cols() {
                return Err(Error::shape("sparse_affine_relu", format!("bias {:?}", vb.shape())));
            }
            let b = vb.row(0).to_vec();
            for r in 0..value.rows() {
                for (o, bv) in value.row_mut(r).iter_mut().zip(&b) {
                    *o += bv;
                }
            }
        }
        let value = value.map(|v| v.max(0.0));
        self.push(
            "sparse_affine_relu",
            value,
            Op::SparseAffineRelu {
                terms: terms.to_vec(),
                bias,
            },
        )
    }

    /// Aggregates `dense` with the symmetric-normalized, self-looped weighted
    /// combination `I + Σ_i w_i L_i` of a sparse stack, differentiable with
    /// respect to the `1 x k` weights `w`.
    pub fn stack_aggregate(&mut self, weights: Var, stack: &Arc<SparseStack>, dense: Var) -> Result<Var> {
        let vw = self.value(weights);
        if vw.rows() != 1 || vw.cols() != stack.num_layers() {
            return Err(Error::shape(
                "stack_aggregate",
                format!("weights {:?} for {} layers", vw.shape(), stack.num_layers()),
            ));
        }
        let mut combined = stack.combine_values(vw.row(0))?;
        for &d in stack.diagonal_positions() {
            combined[d] += 1.0;
        }
        let pattern = stack.pattern();
        let mut inv_sqrt_deg = Vec::with_capacity(stack.dim());
        for r in 0..stack.dim() {
            let span = pattern.indptr()[r]..pattern.indptr()[r + 1];
            let deg: f64 = combined[span].iter().sum();
            if deg <= 0.0 || !deg.is_finite() {
                return Err(Error::NonFinite { op: "stack_aggregate" });
            }
            inv_sqrt_deg.push(1.0 / deg.sqrt());
        }
        let mut normalized_values = combined.clone();
        for (k, (r, c, _)) in pattern.iter().enumerate() {
            normalized_values[k] *= inv_sqrt_deg[r] * inv_sqrt_deg[c];
        }
        let normalized = stack.with_values(normalized_values);
        let value = normalized.spmm(self.value(dense))?;
        self.push(
            "stack_aggregate",
            value,
            Op::StackAggregate {
                weights,
                stack: Arc::clone(stack),
                dense,
                combined,
                inv_sqrt_deg,
                normalized,
            },
        )
    }

    /// Reverse pass from a `1 x 1` loss. Returns gradients for every leaf;
    /// leaves the loss does not depend on have no entry.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        check_scalar("backward", self.value(loss))
            .map_err(|_| Error::InvalidArgument("backward needs a 1x1 loss".into()))?;
        let mut grads: Vec<Option<Matrix>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Matrix::scalar(1.0));
        let mut leaves: Vec<Option<Matrix>> = Vec::new();
        leaves.resize_with(self.nodes.len(), || None);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => leaves[i] = Some(g),
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let mut da = Matrix::zeros(va.rows(), va.cols());
                    gemm(&g, false, vb, true, 0.0, &mut da);
                    let mut db = Matrix::zeros(vb.rows(), vb.cols());
                    gemm(va, true, &g, false, 0.0, &mut db);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulNt(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let mut da = Matrix::zeros(va.rows(), va.cols());
                    gemm(&g, false, vb, false, 0.0, &mut da);
                    let mut db = Matrix::zeros(vb.rows(), vb.cols());
                    gemm(&g, true, va, false, 0.0, &mut db);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Spmm(s, d) => accumulate(&mut grads, *d, s.spmm_transposed(&g)?),
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddRow(x, row) => {
                    accumulate(&mut grads, *row, column_sums(&g));
                    accumulate(&mut grads, *x, g);
                }
                Op::Hadamard(a, b) => {
                    let da = zip_map(&g, self.value(*b), |x, y| x * y);
                    let db = zip_map(&g, self.value(*a), |x, y| x * y);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(x, f) => accumulate(&mut grads, *x, g.map(|v| v * f)),
                Op::ScaleBy(s, x) => {
                    let f = self.value(*s).get(0, 0);
                    let ds = dot(&g, self.value(*x));
                    accumulate(&mut grads, *s, Matrix::scalar(ds));
                    accumulate(&mut grads, *x, g.map(|v| v * f));
                }
                Op::Blend {
                    weight,
                    fresh,
                    extra,
                    history,
                } => {
                    let w = self.value(*weight).get(0, 0);
                    let mut dw = dot(&g, self.value(*fresh)) - dot(&g, self.value(*history));
                    if let Some((e, c)) = extra {
                        dw += c * dot(&g, self.value(*e));
                        accumulate(&mut grads, *e, g.map(|v| v * w * c));
                    }
                    accumulate(&mut grads, *weight, Matrix::scalar(dw));
                    accumulate(&mut grads, *fresh, g.map(|v| v * w));
                    accumulate(&mut grads, *history, g.map(|v| v * (1.0 - w)));
                }
                Op::Relu(x) => {
                    let dx = zip_map(&g, &node.value, |gv, out| if out > 0.0 { gv } else { 0.0 });
                    accumulate(&mut grads, *x, dx);
                }
                Op::Sigmoid(x) => {
                    let dx = zip_map(&g, &node.value, |gv, y| gv * y * (1.0 - y));
                    accumulate(&mut grads, *x, dx);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let width = self.value(*p).cols();
                        accumulate(&mut grads, *p, g.columns(start, start + width));
                        start += width;
                    }
                }
                Op::GatherRows(x, rows) => {
                    let vx = self.value(*x);
                    let mut dx = Matrix::zeros(vx.rows(), vx.cols());
                    for (k, &r) in rows.iter().enumerate() {
                        for (o, gv) in dx.row_mut(r).iter_mut().zip(g.row(k)) {
                            *o += gv;
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Dropout { input, keep, scale } => {
                    let data = g
                        .as_slice()
                        .iter()
                        .zip(keep)
                        .map(|(&gv, &k)| if k { gv * scale } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *input, Matrix::new(g.rows(), g.cols(), data)?);
                }
                Op::RowSoftmax(x) => {
                    let y = &node.value;
                    let mut dx = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let inner: f64 = g.row(r).iter().zip(y.row(r)).map(|(a, b)| a * b).sum();
                        for ((o, gv), yv) in dx.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                            *o = yv * (gv - inner);
                        }
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::CrossEntropy { logits, labels } => {
                    let scale = g.get(0, 0) / labels.len() as f64;
                    let mut dx = row_softmax_of(self.value(*logits));
                    for (r, &label) in labels.iter().enumerate() {
                        let row = dx.row_mut(r);
                        row[label] -= 1.0;
                        for v in row.iter_mut() {
                            *v *= scale;
                        }
                    }
                    accumulate(&mut grads, *logits, dx);
                }
                Op::Sum(x) => {
                    let vx = self.value(*x);
                    accumulate(&mut grads, *x, Matrix::filled(vx.rows(), vx.cols(), g.get(0, 0)));
                }
                Op::SparseAffineRelu { terms, bias } => {
                    let masked = zip_map(&g, &node.value, |gv, out| if out > 0.0 { gv } else { 0.0 });
                    for (s, x) in terms {
                        accumulate(&mut grads, *x, s.spmm_transposed(&masked)?);
                    }
                    if let Some(b) = bias {
                        accumulate(&mut grads, *b, column_sums(&masked));
                    }
                }
                Op::StackAggregate {
                    weights,
                    stack,
                    dense,
                    combined,
                    inv_sqrt_deg,
                    normalized,
                } => {
                    let vd = self.value(*dense);
                    accumulate(&mut grads, *dense, normalized.spmm_transposed(&g)?);
                    // d loss / d normalized entry, then back through D^{-1/2} B D^{-1/2}.
                    let pattern = stack.pattern();
                    let d_norm: Vec<f64> = pattern
                        .iter()
                        .map(|(r, c, _)| g.row(r).iter().zip(vd.row(c)).map(|(a, b)| a * b).sum())
                        .collect();
                    let mut d_inv_sqrt = vec![0.0; stack.dim()];
                    for (k, (r, c, _)) in pattern.iter().enumerate() {
                        d_inv_sqrt[r] += d_norm[k] * combined[k] * inv_sqrt_deg[c];
                        d_inv_sqrt[c] += d_norm[k] * combined[k] * inv_sqrt_deg[r];
                    }
                    let d_deg: Vec<f64> = d_inv_sqrt
                        .iter()
                        .zip(inv_sqrt_deg)
                        .map(|(ds, s)| -0.5 * ds * s * s * s)
                        .collect();
                    let d_combined: Vec<f64> = pattern
                        .iter()
                        .enumerate()
                        .map(|(k, (r, c, _))| d_norm[k] * inv_sqrt_deg[r] * inv_sqrt_deg[c] + d_deg[r])
                        .collect();
                    let dw: Vec<f64> = (0..stack.num_layers())
                        .map(|i| {
                            stack
                                .layer_values(i)
                                .iter()
                                .zip(&d_combined)
                                .map(|(l, d)| l * d)
                                .sum()
                        })
                        .collect();
                    accumulate(&mut grads, *weights, Matrix::new(1, dw.len(), dw)?);
                }
            }
        }
        Ok(Gradients { grads: leaves })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, contribution: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_scaled(&contribution, 1.0),
        slot @ None => *slot = Some(contribution),
    }
}

fn zip_map(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| f(x, y)).collect();
    Matrix::new(a.rows(), a.cols(), data).expect("same shape")
}

fn dot(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

fn column_sums(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, m.cols());
    for r in 0..m.rows() {
        for (o, v) in out.row_mut(0).iter_mut().zip(m.row(r)) {
            *o += v;
        }
    }
    out
}

/// Row-wise softmax of a plain matrix.
pub fn row_softmax_of(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
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
    out
}

/// Leaf gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros of its shape if the loss does not reach it.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Matrix {
        match self.get(v) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = tape.value(v).shape();
                Matrix::zeros(r, c)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn relu_and_softmax_values() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::from_rows(&[[-1.0, 0.0, 2.0]])).unwrap();
        let r = t.relu(x).unwrap();
        assert_eq!(t.value(r), &Matrix::from_rows(&[[0.0, 0.0, 2.0]]));
        let z = t.leaf(Matrix::from_rows(&[[0.0, 0.0]])).unwrap();
        let s = t.row_softmax(z).unwrap();
        assert_eq!(t.value(s), &Matrix::from_rows(&[[0.5, 0.5]]));
    }

    #[test]
    fn cross_entropy_of_uniform_is_ln2() {
        let mut t = Tape::new();
        let z = t.leaf(Matrix::from_rows(&[[0.0, 0.0]])).unwrap();
        let l = t.cross_entropy(z, &[0]).unwrap();
        assert!((t.value(l).get(0, 0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(t.cross_entropy(z, &[]).is_err());
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::from_rows(&[[1.0, -2.0], [3.0, 4.0]])).unwrap();
        let l = t.sum(x).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x).unwrap(), &Matrix::filled(2, 2, 1.0));
    }

    #[test]
    fn relu_sum_gradient() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::from_rows(&[[-1.0, 2.0]])).unwrap();
        let r = t.relu(x).unwrap();
        let l = t.sum(r).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x).unwrap(), &Matrix::from_rows(&[[0.0, 1.0]]));
    }

    #[test]
    fn unreached_leaf_gets_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::filled(1, 2, 1.0)).unwrap();
        let y = t.leaf(Matrix::filled(2, 3, 1.0)).unwrap();
        let l = t.sum(x).unwrap();
        let g = t.backward(l).unwrap();
        assert!(g.get(y).is_none());
        assert_eq!(g.wrt(&t, y), Matrix::zeros(2, 3));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::filled(1, 2, 1.0)).unwrap();
        assert!(matches!(t.backward(x), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn non_finite_values_trip() {
        let mut t = Tape::new();
        let x = t.leaf(Matrix::scalar(1.0)).unwrap();
        assert!(matches!(t.scale(x, f64::INFINITY), Err(Error::NonFinite { op: "scale" })));
        assert!(t.leaf(Matrix::scalar(f64::NAN)).is_err());
    }

    #[test]
    fn dropout_eval_is_identity() {
        let mut t = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = t.leaf(Matrix::filled(3, 3, 2.0)).unwrap();
        let y = t.dropout(x, 0.2, false, &mut rng).unwrap();
        assert_eq!(x, y);
        let z = t.dropout(x, 0.5, true, &mut rng).unwrap();
        assert!(t.value(z).as_slice().iter().all(|&v| v == 0.0 || v == 4.0));
        assert!(t.dropout(x, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::new();
        let a = t.leaf(Matrix::zeros(2, 3)).unwrap();
        let b = t.leaf(Matrix::zeros(2, 2)).unwrap();
        assert!(matches!(t.matmul(a, a), Err(Error::Shape { .. })));
        assert!(matches!(t.add(a, b), Err(Error::Shape { .. })));
        assert!(t.gather_rows(a, &[2]).is_err());
    }
}
