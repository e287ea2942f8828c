//! Compressed sparse row matrices used for adjacency, sign masks and motif
//! matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::{Error, Result};

/// Rows of the output handled per rayon task in [`CsrMatrix::spmm`].
const SPMM_ROW_CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CsrMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed
    /// and explicit zeros are dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= rows || c >= cols {
                return Err(Error::shape(
                    "CsrMatrix::from_triplets",
                    format!("entry ({r}, {c}) outside {rows}x{cols}"),
                ));
            }
        }
        sorted.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = CsrMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        };
        m.prune_zeros();
        Ok(m)
    }

    fn prune_zeros(&mut self) {
        if self.values.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut indptr = vec![0; self.rows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.values[k] != 0.0 {
                    indices.push(self.indices[k]);
                    values.push(self.values[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (idx, vals) = self.row(r);
        match idx.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (idx, vals) = self.row(r);
            idx.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.iter().all(|(r, c, v)| self.get(c, r) == v)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let triplets: Vec<_> = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        CsrMatrix::from_triplets(self.cols, self.rows, &triplets).expect("transpose stays in bounds")
    }

    /// Same sparsity pattern with every stored value replaced by one.
    pub fn support(&self) -> CsrMatrix {
        CsrMatrix {
            values: vec![1.0; self.values.len()],
            ..self.clone()
        }
    }

    /// `D^{-1/2} (A [+ I]) D^{-1/2}` with `D` the row sums of the (self-looped)
    /// matrix. Rows with zero degree stay zero.
    pub fn sym_normalized(&self, self_loops: bool) -> CsrMatrix {
        assert_eq!(self.rows, self.cols, "normalization needs a square matrix");
        let base = if self_loops {
            let mut t: Vec<_> = self.iter().collect();
            t.extend((0..self.rows).map(|i| (i, i, 1.0)));
            CsrMatrix::from_triplets(self.rows, self.cols, &t).expect("square")
        } else {
            self.clone()
        };
        let inv_sqrt: Vec<f64> = base
            .row_sums()
            .into_iter()
            .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        let mut out = base;
        for r in 0..out.rows {
            for k in out.indptr[r]..out.indptr[r + 1] {
                out.values[k] *= inv_sqrt[r] * inv_sqrt[out.indices[k]];
            }
        }
        out
    }

    /// Sparse-times-dense product.
    pub fn spmm(&self, dense: &Matrix) -> Result<Matrix> {
        if self.cols != dense.rows() {
            return Err(Error::shape(
                "spmm",
                format!("{}x{} sparse x {:?} dense", self.rows, self.cols, dense.shape()),
            ));
        }
        let width = dense.cols();
        let mut out = Matrix::zeros(self.rows, width);
        if width == 0 {
            return Ok(out);
        }
        out.as_mut_slice()
            .par_chunks_mut(width * SPMM_ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, block)| {
                for (offset, out_row) in block.chunks_mut(width).enumerate() {
                    let r = chunk * SPMM_ROW_CHUNK + offset;
                    let (idx, vals) = self.row(r);
                    for (&c, &v) in idx.iter().zip(vals) {
                        for (o, &x) in out_row.iter_mut().zip(dense.row(c)) {
                            *o += v * x;
                        }
                    }
                }
            });
        Ok(out)
    }

    /// `selfᵀ · dense`, accumulated row by row in a fixed order.
    pub fn spmm_transposed(&self, dense: &Matrix) -> Result<Matrix> {
        if self.rows != dense.rows() {
            return Err(Error::shape(
                "spmm_transposed",
                format!("{}x{} sparse^T x {:?} dense", self.rows, self.cols, dense.shape()),
            ));
        }
        let mut out = Matrix::zeros(self.cols, dense.cols());
        for r in 0..self.rows {
            let (idx, vals) = self.row(r);
            let src = dense.row(r);
            for (&c, &v) in idx.iter().zip(vals) {
                for (o, &x) in out.row_mut(c).iter_mut().zip(src) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            m.set(r, c, v);
        }
        m
    }
}

/// Several square sparse matrices laid out on one shared sparsity pattern,
/// the input to a learnable weighted combination `Σ_i w_i L_i`.
///
/// The pattern is the union of the layers' supports plus the full diagonal, so
/// a self-looped combination can be formed without changing structure.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseStack {
    pattern: CsrMatrix,
    layers: Vec<Vec<f64>>,
    diagonal: Vec<usize>,
}

impl SparseStack {
    pub fn new(layers: &[CsrMatrix]) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty sparse stack".into()))?;
        let (rows, cols) = (first.rows, first.cols);
        if rows != cols || layers.iter().any(|l| l.rows != rows || l.cols != cols) {
            return Err(Error::shape("SparseStack::new", "layers must be square and equal-sized"));
        }
        let mut union: Vec<_> = layers
            .iter()
            .flat_map(|l| l.iter().map(|(r, c, _)| (r, c, 1.0)))
            .collect();
        union.extend((0..rows).map(|i| (i, i, 1.0)));
        let pattern = CsrMatrix::from_triplets(rows, cols, &union)?.support();
        let layers = layers
            .iter()
            .map(|l| {
                pattern
                    .iter()
                    .map(|(r, c, _)| l.get(r, c))
                    .collect::<Vec<f64>>()
            })
            .collect();
        let diagonal = (0..rows)
            .map(|r| {
                let (idx, _) = pattern.row(r);
                pattern.indptr[r] + idx.binary_search(&r).expect("diagonal present")
            })
            .collect();
        Ok(SparseStack {
            pattern,
            layers,
            diagonal,
        })
    }

    pub fn dim(&self) -> usize {
        self.pattern.rows
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Shared pattern; stored values are all one.
    pub fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }

    /// Values of layer `i`, aligned with the pattern's storage order.
    pub fn layer_values(&self, i: usize) -> &[f64] {
        &self.layers[i]
    }

    /// Storage position of the diagonal entry of each row.
    pub fn diagonal_positions(&self) -> &[usize] {
        &self.diagonal
    }

    /// Values of `Σ_i weights[i] · L_i`, aligned with the pattern.
    pub fn combine_values(&self, weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != self.layers.len() {
            return Err(Error::shape(
                "SparseStack::combine",
                format!("{} weights for {} layers", weights.len(), self.layers.len()),
            ));
        }
        let mut values = vec![0.0; self.pattern.nnz()];
        for (w, layer) in weights.iter().zip(&self.layers) {
            for (o, &v) in values.iter_mut().zip(layer) {
                *o += w * v;
            }
        }
        Ok(values)
    }

    /// `Σ_i weights[i] · L_i` as a matrix on the shared pattern; entries that
    /// combine to zero are kept as explicit zeros.
    pub fn combine(&self, weights: &[f64]) -> Result<CsrMatrix> {
        Ok(self.with_values(self.combine_values(weights)?))
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> CsrMatrix {
        debug_assert_eq!(values.len(), self.pattern.nnz());
        CsrMatrix {
            values,
            ..self.pattern.clone()
        }
    }
}
