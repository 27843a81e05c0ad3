use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Per-sample column counts and the offsets used to address blocks of a
/// dual point either in full-simplex form (`|Y_i|` entries per sample) or in
/// reduced form (`|Y_i| - 1` entries per sample).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    sizes: Vec<usize>,
    full: Vec<usize>,
    reduced: Vec<usize>,
    column_sample: Vec<usize>,
}

impl BlockLayout {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut full = Vec::with_capacity(sizes.len() + 1);
        let mut reduced = Vec::with_capacity(sizes.len() + 1);
        let mut column_sample = Vec::new();
        full.push(0);
        reduced.push(0);
        for (i, &q) in sizes.iter().enumerate() {
            full.push(full[i] + q);
            reduced.push(reduced[i] + q.saturating_sub(1));
            column_sample.extend(std::iter::repeat_n(i, q));
        }
        BlockLayout {
            sizes,
            full,
            reduced,
            column_sample,
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Column range of sample `i` in full form.
    pub fn full_range(&self, i: usize) -> std::ops::Range<usize> {
        self.full[i]..self.full[i + 1]
    }

    /// Coordinate range of block `i` in reduced form.
    pub fn reduced_range(&self, i: usize) -> std::ops::Range<usize> {
        self.reduced[i]..self.reduced[i + 1]
    }

    pub fn full_len(&self) -> usize {
        *self.full.last().unwrap()
    }

    pub fn reduced_len(&self) -> usize {
        *self.reduced.last().unwrap()
    }

    pub(crate) fn sample_of_column(&self, col: usize) -> usize {
        self.column_sample[col]
    }
}

/// Row-compressed storage for the stacked `d × Σ|Y_i|` corrected-feature
/// matrix. Rows are features; columns are the concatenated label columns of
/// every sample.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RowMatrix {
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl RowMatrix {
    pub(crate) fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                debug_assert!(c < ncols);
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        RowMatrix {
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub(crate) fn nrows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub(crate) fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub(crate) fn row(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[j]..self.indptr[j + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    /// `out[j] = ⟨row_j, u⟩`.
    pub(crate) fn mul_vec(&self, u: &[f64]) -> Array1<f64> {
        debug_assert_eq!(u.len(), self.ncols);
        let mut out = Array1::zeros(self.nrows());
        for (j, o) in out.iter_mut().enumerate() {
            let (idx, val) = self.row(j);
            *o = idx.iter().zip(val).map(|(&c, &v)| v * u[c]).sum();
        }
        out
    }

    pub(crate) fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// The transpose, again row-compressed.
    pub(crate) fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.nrows() {
            let (idx, val) = self.row(j);
            for (&c, &v) in idx.iter().zip(val) {
                indices[next[c]] = j;
                values[next[c]] = v;
                next[c] += 1;
            }
        }
        RowMatrix {
            ncols: self.nrows(),
            indptr,
            indices,
            values,
        }
    }
}

/// Rows of a [`RowMatrix`] picked by an ascending index list, without
/// copying. Local row `r` is base row `rows[r]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RowSelection<'a> {
    base: &'a RowMatrix,
    rows: &'a [usize],
}

impl<'a> RowSelection<'a> {
    pub(crate) fn new(base: &'a RowMatrix, rows: &'a [usize]) -> Self {
        RowSelection { base, rows }
    }

    pub(crate) fn nrows(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub(crate) fn row(&self, local: usize) -> (&'a [usize], &'a [f64]) {
        self.base.row(self.rows[local])
    }

    /// `out[r] = ⟨row_r, u⟩`.
    pub(crate) fn mul_vec(&self, u: &[f64]) -> Array1<f64> {
        debug_assert_eq!(u.len(), self.base.ncols);
        self.rows
            .iter()
            .map(|&j| {
                let (idx, val) = self.base.row(j);
                idx.iter().zip(val).map(|(&c, &v)| v * u[c]).sum()
            })
            .collect()
    }

    /// `Mᵀ w`, skipping zero coordinates of `w`.
    pub(crate) fn mul_transpose_vec(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.nrows());
        let mut out = vec![0.0; self.base.ncols];
        for (&j, &wj) in self.rows.iter().zip(w) {
            if wj == 0.0 {
                continue;
            }
            let (idx, val) = self.base.row(j);
            for (&c, &v) in idx.iter().zip(val) {
                out[c] += wj * v;
            }
        }
        out
    }

    pub(crate) fn frobenius_sq(&self) -> f64 {
        self.rows
            .iter()
            .map(|&j| self.base.row(j).1.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}

/// Corrected features `ψ_i(y) = F(x_i, y_i) - F(x_i, y)` of a whole training
/// set, one `d × |Y_i|` matrix per sample.
///
/// The matrices are stored stacked and row-compressed; [`block`](Self::block)
/// materializes a dense copy of one of them. The last column of every sample
/// is the reference column dropped by the reduced simplex parameterization.
#[derive(Debug, Clone)]
pub struct CorrectedFeatureSet {
    n_features: usize,
    labels: Vec<usize>,
    layout: Arc<BlockLayout>,
    pub(crate) matrix: RowMatrix,
    /// Transpose of `matrix`: one row per label column.
    columns: RowMatrix,
    /// `‖b_j‖²` of the affine form of feature `j`, including the `1/n²` factor.
    pub(crate) coef_norm_sq: Vec<f64>,
    /// `c_j = (1/n) Σ_i A_i[j, last]`.
    pub(crate) coef_offset: Vec<f64>,
}

impl CorrectedFeatureSet {
    /// Builds from dense per-sample matrices. `labels[i]` is the column of
    /// `blocks[i]` holding the true label, which must be all zeros.
    pub fn from_dense(blocks: &[Array2<f64>], labels: &[usize]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidData("no samples".into()));
        }
        let d = blocks[0].nrows();
        let sizes: Vec<usize> = blocks.iter().map(|b| b.ncols()).collect();
        let layout = BlockLayout::new(sizes);
        let mut rows = vec![Vec::new(); d];
        for (i, a) in blocks.iter().enumerate() {
            if a.nrows() != d {
                return Err(Error::DimensionMismatch {
                    what: "rows of A_i",
                    expected: d,
                    found: a.nrows(),
                });
            }
            let base = layout.full_range(i).start;
            for ((j, y), &v) in a.indexed_iter() {
                if v != 0.0 {
                    rows[j].push((base + y, v));
                }
            }
        }
        Self::from_rows(layout, labels.to_vec(), rows, blocks)
    }

    /// Builds from per-feature sparse rows over the concatenated columns.
    pub(crate) fn from_sparse_rows(
        sizes: Vec<usize>,
        labels: Vec<usize>,
        rows: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        Self::from_rows(BlockLayout::new(sizes), labels, rows, &[])
    }

    fn from_rows(
        layout: BlockLayout,
        labels: Vec<usize>,
        rows: Vec<Vec<(usize, f64)>>,
        dense: &[Array2<f64>],
    ) -> Result<Self> {
        let n = layout.n_blocks();
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                what: "labels",
                expected: n,
                found: labels.len(),
            });
        }
        if let Some(i) = layout.sizes().iter().position(|&q| q < 2) {
            return Err(Error::InvalidData(format!("sample {i} has fewer than two labels")));
        }
        for (i, (&y, &q)) in labels.iter().zip(layout.sizes()).enumerate() {
            if y >= q {
                return Err(Error::InvalidData(format!("label {y} of sample {i} exceeds |Y_i| = {q}")));
            }
        }
        if !dense.is_empty() && dense.iter().any(|a| a.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidData("non-finite entry".into()));
        }
        let matrix = RowMatrix::from_rows(layout.full_len(), rows);
        if matrix.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite entry".into()));
        }
        for (&c, _) in matrix.indices.iter().zip(&matrix.values) {
            let i = layout.sample_of_column(c);
            if c - layout.full_range(i).start == labels[i] {
                return Err(Error::InvalidData(format!(
                    "true-label column of sample {i} is not zero"
                )));
            }
        }

        let (coef_norm_sq, coef_offset) = feature_coefficients(&matrix, &layout);
        Ok(CorrectedFeatureSet {
            n_features: matrix.nrows(),
            labels,
            layout: Arc::new(layout),
            columns: matrix.transpose(),
            matrix,
            coef_norm_sq,
            coef_offset,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.layout.n_blocks()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn sizes(&self) -> &[usize] {
        self.layout.sizes()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    /// Number of stored nonzeros across all `A_i`.
    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    /// Dense copy of `A_i`.
    pub fn block(&self, i: usize) -> Array2<f64> {
        let range = self.layout.full_range(i);
        let mut a = Array2::zeros((self.n_features, range.len()));
        for j in 0..self.n_features {
            let (idx, val) = self.matrix.row(j);
            let lo = idx.partition_point(|&c| c < range.start);
            let hi = idx.partition_point(|&c| c < range.end);
            for k in lo..hi {
                a[[j, idx[k] - range.start]] = val[k];
            }
        }
        a
    }

    /// Nonzero `(feature, value)` entries of label column `c`.
    pub(crate) fn column(&self, c: usize) -> (&[usize], &[f64]) {
        self.columns.row(c)
    }

    /// Writes `Σ_{l<q} A_k[j, l] - (q - 1) A_k[j, q]` for every feature `j`
    /// into `out`, where `q` indexes the last column of sample `k`.
    pub(crate) fn sample_sums_into(&self, k: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let range = self.layout.full_range(k);
        let tail = (range.len() - 1) as f64;
        for c in range.clone() {
            let weight = if c + 1 == range.end { -tail } else { 1.0 };
            let (rows, vals) = self.columns.row(c);
            for (&j, &v) in rows.iter().zip(vals) {
                out[j] += weight * v;
            }
        }
    }

    /// `Σ_i ‖A_i‖_F²`.
    pub fn frobenius_sq(&self) -> f64 {
        self.matrix.frobenius_sq()
    }
}

/// Per-feature `‖b_j‖²` and `c_j` of the affine form
/// `[(1/n) Σ_i A_i ∘ θ_i]_j = ⟨b_j, θ⟩ + c_j`.
fn feature_coefficients(matrix: &RowMatrix, layout: &BlockLayout) -> (Vec<f64>, Vec<f64>) {
    let n = layout.n_blocks() as f64;
    let mut norms = Vec::with_capacity(matrix.nrows());
    let mut offsets = Vec::with_capacity(matrix.nrows());
    for j in 0..matrix.nrows() {
        let (idx, val) = matrix.row(j);
        let mut norm = 0.0;
        let mut offset = 0.0;
        for_each_sample_run(idx, layout, |i, lo, hi| {
            let range = layout.full_range(i);
            let q = range.len();
            let last = if idx[hi - 1] == range.end - 1 { val[hi - 1] } else { 0.0 };
            // Σ_{l<q-1} (a_l - last)² with unstored a_l = 0.
            let mut s = (q - 1) as f64 * last * last;
            for k in lo..hi {
                if idx[k] != range.end - 1 {
                    let a = val[k];
                    s += (a - last) * (a - last) - last * last;
                }
            }
            norm += s;
            offset += last;
        });
        norms.push(norm / (n * n));
        offsets.push(offset / n);
    }
    (norms, offsets)
}

/// Calls `f(sample, lo, hi)` for each maximal run `idx[lo..hi]` of columns
/// belonging to one sample.
pub(crate) fn for_each_sample_run<F>(idx: &[usize], layout: &BlockLayout, mut f: F)
where
    F: FnMut(usize, usize, usize),
{
    let mut lo = 0;
    while lo < idx.len() {
        let i = layout.sample_of_column(idx[lo]);
        let end = layout.full_range(i).end;
        let hi = lo + idx[lo..].partition_point(|&c| c < end);
        f(i, lo, hi);
        lo = hi;
    }
}

/// Regularization weights: `alpha` scales the ℓ2 part inside the penalty and
/// `beta` multiplies the whole elastic-net term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub alpha: f64,
    pub beta: f64,
}

impl Hyperparams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidData(format!(
                "alpha and beta must be positive, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Hyperparams { alpha, beta })
    }

    /// `β (α/2 ‖w‖² + ‖w‖₁)`.
    pub fn penalty(&self, w: &[f64]) -> f64 {
        let (sq, l1) = w.iter().fold((0.0, 0.0), |(s, l), x| (s + x * x, l + x.abs()));
        self.beta * (0.5 * self.alpha * sq + l1)
    }
}

/// Smallest `β` at which the all-zero model is optimal for every `α`:
/// `(1/n) ‖Σ_i A_i 1/|Y_i|‖_∞`.
pub fn beta_max(data: &CorrectedFeatureSet) -> f64 {
    let layout = data.layout();
    let mut u = vec![0.0; layout.full_len()];
    for i in 0..layout.n_blocks() {
        let range = layout.full_range(i);
        let w = 1.0 / range.len() as f64;
        u[range].iter_mut().for_each(|x| *x = w);
    }
    let n = data.n_samples() as f64;
    data.matrix
        .mul_vec(&u)
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        / n
}
