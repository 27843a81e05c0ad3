use std::sync::Arc;

use ndarray::{Array1, ArrayView1};

use super::data::BlockLayout;
use crate::error::{Error, Result};

/// Lower clamp for simplex coordinates produced from a primal point.
pub const EPS_SIMPLEX: f64 = 1e-12;

/// A vector with one block of `|Y_i| - 1` coordinates per sample.
///
/// Used for dual gradients and ball centers, which need not lie in the
/// simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    layout: Arc<BlockLayout>,
    values: Array1<f64>,
}

impl BlockVector {
    pub fn new(layout: Arc<BlockLayout>, values: Array1<f64>) -> Result<Self> {
        if values.len() != layout.reduced_len() {
            return Err(Error::DimensionMismatch {
                what: "block vector length",
                expected: layout.reduced_len(),
                found: values.len(),
            });
        }
        Ok(BlockVector { layout, values })
    }

    pub fn zeros(layout: Arc<BlockLayout>) -> Self {
        let values = Array1::zeros(layout.reduced_len());
        BlockVector { layout, values }
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array1<f64> {
        &mut self.values
    }

    pub fn n_blocks(&self) -> usize {
        self.layout.n_blocks()
    }

    pub fn block(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.slice(ndarray::s![self.layout.reduced_range(i)])
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.dot(&self.values)
    }

    pub fn dot(&self, other: &BlockVector) -> f64 {
        self.values.dot(&other.values)
    }

    /// Appends `1 - Σ block` to every block, producing full simplex-form
    /// coordinates aligned with the stacked columns of the data.
    pub(crate) fn extend_affine(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layout.full_len());
        for i in 0..self.n_blocks() {
            let b = self.block(i);
            out.extend(b.iter().copied());
            out.push(1.0 - b.sum());
        }
        out
    }
}

/// A point `θ = (θ_1, …, θ_n)` of the dual feasible region, each block in
/// the open simplex `{t : t_j > 0, Σ t_j < 1}`.
///
/// Stored in full simplex form so the implicit last coordinate `1 - Σθ_i`
/// keeps full relative precision when it is small.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    layout: Arc<BlockLayout>,
    probs: Array1<f64>,
}

impl DualPoint {
    /// Builds from reduced blocks, rejecting points outside the open simplex.
    pub fn from_blocks(layout: Arc<BlockLayout>, blocks: &[Array1<f64>]) -> Result<Self> {
        if blocks.len() != layout.n_blocks() {
            return Err(Error::DimensionMismatch {
                what: "dual blocks",
                expected: layout.n_blocks(),
                found: blocks.len(),
            });
        }
        let mut values = Vec::with_capacity(layout.reduced_len());
        for (i, b) in blocks.iter().enumerate() {
            let q = layout.sizes()[i];
            if b.len() != q - 1 {
                return Err(Error::DimensionMismatch {
                    what: "dual block length",
                    expected: q - 1,
                    found: b.len(),
                });
            }
            values.extend(b.iter().copied());
        }
        Self::from_reduced(&BlockVector::new(layout, Array1::from(values))?)
    }

    /// Interprets a reduced block vector as a dual point.
    pub fn from_reduced(v: &BlockVector) -> Result<Self> {
        let full = v.extend_affine();
        let layout = v.layout().clone();
        for i in 0..layout.n_blocks() {
            let block = &full[layout.full_range(i)];
            if block.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
                return Err(Error::InfeasibleDual { block: i });
            }
        }
        Ok(DualPoint {
            layout,
            probs: Array1::from(full),
        })
    }

    /// Every block equal to `1/|Y_i|`.
    pub fn uniform(layout: Arc<BlockLayout>) -> Self {
        let mut probs = Array1::zeros(layout.full_len());
        for i in 0..layout.n_blocks() {
            let r = layout.full_range(i);
            let w = 1.0 / r.len() as f64;
            probs.slice_mut(ndarray::s![r]).fill(w);
        }
        DualPoint { layout, probs }
    }

    /// Builds from full probability blocks (e.g. softmax outputs), clamping
    /// each coordinate to at least [`EPS_SIMPLEX`] and renormalizing.
    pub(crate) fn from_probabilities_clamped(layout: Arc<BlockLayout>, mut probs: Vec<f64>) -> Self {
        for i in 0..layout.n_blocks() {
            let block = &mut probs[layout.full_range(i)];
            if block.iter().any(|&p| !(p >= EPS_SIMPLEX)) {
                block.iter_mut().for_each(|p| {
                    if !(*p >= EPS_SIMPLEX) {
                        *p = EPS_SIMPLEX
                    }
                });
                let total: f64 = block.iter().sum();
                block.iter_mut().for_each(|p| *p /= total);
            }
        }
        DualPoint {
            layout,
            probs: Array1::from(probs),
        }
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn n_blocks(&self) -> usize {
        self.layout.n_blocks()
    }

    /// Reduced block `θ_i` (length `|Y_i| - 1`).
    pub fn block(&self, i: usize) -> ArrayView1<'_, f64> {
        let r = self.layout.full_range(i);
        self.probs.slice(ndarray::s![r.start..r.end - 1])
    }

    /// Full block `(θ_i, 1 - Σθ_i)`.
    pub fn full_block(&self, i: usize) -> ArrayView1<'_, f64> {
        self.probs.slice(ndarray::s![self.layout.full_range(i)])
    }

    /// All full blocks concatenated, aligned with the data columns.
    pub fn full(&self) -> &Array1<f64> {
        &self.probs
    }

    /// The reduced coordinates as a [`BlockVector`].
    pub fn reduced(&self) -> BlockVector {
        let mut values = Vec::with_capacity(self.layout.reduced_len());
        for i in 0..self.n_blocks() {
            values.extend(self.block(i).iter().copied());
        }
        BlockVector {
            layout: self.layout.clone(),
            values: Array1::from(values),
        }
    }

    /// Distance to the uniform point in the max norm over reduced coordinates.
    pub fn max_deviation_from_uniform(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_blocks() {
            let u = 1.0 / self.layout.sizes()[i] as f64;
            for &t in self.block(i) {
                worst = worst.max((t - u).abs());
            }
        }
        worst
    }
}
