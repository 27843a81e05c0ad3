//! Ball centers in feature space without a pass over the data.
//!
//! For `θ̂` the softmax of the scores at `w`, the reduced dual gradient is
//! `n ∇D̂(θ̂)_i = Q (Mᵀ δ)_i + ρ_i` with `δ = w(θ̂) - w`, where `Q` maps a full
//! label block `t` to `(t_l - t_last)_{l<last}` and `ρ_i` is nonzero only
//! where `θ̂_i` was clamped into the simplex interior. Hence
//!
//! ```text
//! M ext(θ̂ - n ∇D̂) = n v - K δ - M ext₀(ρ),   K = Σ_i A_i Q̄ A_iᵀ,
//! ```
//!
//! with `ext₀` appending minus the block sum and `Q̄ = ext₀ ∘ Q`. The support
//! of `δ` is small and stable along a path, so a few cached columns of `K`
//! replace the pass over `M`.

use std::collections::HashMap;

use ndarray::Array1;

use super::data::{for_each_sample_run, CorrectedFeatureSet};
use super::dual::DualPoint;
use super::view::{PrimalVector, ProblemView};

/// Upper bound on the cached entries (columns times `d`).
const MAX_ENTRIES: usize = 1 << 23;

/// Columns computed per sweep over `M`.
const WIDTH: usize = 4;

/// Block corrections at or below this size count as round-off.
const CLAMP_TOL: f64 = 1e-12;

/// Columns of `K` computed so far, keyed by feature.
#[derive(Debug, Clone, Default)]
pub(crate) struct GramCache {
    slots: HashMap<usize, usize>,
    /// Column of slot `s` at `[s d, (s + 1) d)`.
    values: Vec<f64>,
}

impl GramCache {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    pub(crate) fn len(&self) -> usize {
        self.slots.len()
    }

    fn column(&self, d: usize, j: usize) -> &[f64] {
        let s = self.slots[&j];
        &self.values[s * d..(s + 1) * d]
    }

    /// Computes the missing columns among `features`, a few per sweep over `M`.
    /// Returns `false`, leaving the cache unchanged, when they do not fit.
    fn ensure(&mut self, data: &CorrectedFeatureSet, features: &[usize]) -> bool {
        let d = data.n_features();
        let missing: Vec<usize> = features
            .iter()
            .copied()
            .filter(|j| !self.slots.contains_key(j))
            .collect();
        if missing.is_empty() {
            return true;
        }
        if (self.len() + missing.len()) * d > MAX_ENTRIES {
            return false;
        }
        let layout = data.layout();
        let matrix = &data.matrix;
        let base = self.values.len();
        self.values.resize(base + missing.len() * d, 0.0);
        for (chunk_no, chunk) in missing.chunks(WIDTH).enumerate() {
            // x[c][s] = (Q̄ row_j)_c for the s-th feature j of the chunk.
            let mut x = vec![[0.0; WIDTH]; layout.full_len()];
            for (s, &j) in chunk.iter().enumerate() {
                let (idx, val) = matrix.row(j);
                for_each_sample_run(idx, layout, |i, lo, hi| {
                    let range = layout.full_range(i);
                    let last_col = range.end - 1;
                    let t_last = if idx[hi - 1] == last_col { val[hi - 1] } else { 0.0 };
                    for xc in &mut x[range.start..last_col] {
                        xc[s] = -t_last;
                    }
                    for k in lo..hi {
                        if idx[k] != last_col {
                            x[idx[k]][s] += val[k];
                        }
                    }
                    let total: f64 = (range.start..last_col).map(|c| x[c][s]).sum();
                    x[last_col][s] = -total;
                });
            }
            let offset = base + chunk_no * WIDTH * d;
            for r in 0..d {
                let (idx, val) = matrix.row(r);
                let mut acc = [0.0; WIDTH];
                for (&c, &a) in idx.iter().zip(val) {
                    for (o, &xv) in acc.iter_mut().zip(&x[c]) {
                        *o += a * xv;
                    }
                }
                for (s, &a) in acc[..chunk.len()].iter().enumerate() {
                    self.values[offset + s * d + r] = a;
                }
            }
        }
        let first = self.len();
        for (s, &j) in missing.iter().enumerate() {
            self.slots.insert(j, first + s);
        }
        true
    }
}

impl ProblemView<'_> {
    /// `(1/n) M ext(θ̂ - n ∇D̂(θ̂))` over the surviving rows, where `θ̂` was
    /// obtained from the scores `z = Mᵀ w` and `v = (1/n) M θ̂`.
    ///
    /// `None` when the cached route would cost about as much as a plain pass
    /// or not fit in the cache.
    pub(crate) fn center_affine(
        &self,
        theta: &DualPoint,
        z: &[f64],
        w: &PrimalVector,
        v: &Array1<f64>,
        cache: &mut GramCache,
    ) -> Option<Array1<f64>> {
        let data = self.data();
        let surviving = self.active().surviving();
        let w_theta = self.primal_from_sum(v);
        let delta: Vec<(usize, f64)> = surviving
            .iter()
            .zip(w_theta.0.iter().zip(&w.0))
            .filter(|(_, (a, b))| a != b)
            .map(|(&j, (a, b))| (j, a - b))
            .collect();
        let pass_cost: usize = surviving.iter().map(|&j| data.matrix.row(j).0.len()).sum();
        if delta.len() * surviving.len() > pass_cost / 2 {
            return None;
        }
        self.center_affine_with(theta, z, &delta, v, cache)
    }

    /// [`center_affine`](Self::center_affine) for a given sparse `δ`, without
    /// the cost check.
    fn center_affine_with(
        &self,
        theta: &DualPoint,
        z: &[f64],
        delta: &[(usize, f64)],
        v: &Array1<f64>,
        cache: &mut GramCache,
    ) -> Option<Array1<f64>> {
        let data = self.data();
        let d = data.n_features();
        let surviving = self.active().surviving();
        let features: Vec<usize> = delta.iter().map(|&(j, _)| j).collect();
        if !cache.ensure(data, &features) {
            return None;
        }

        let n = self.n_samples() as f64;
        let mut out = v.clone();
        for &(j, dj) in delta {
            let col = cache.column(d, j);
            for (o, &r) in out.iter_mut().zip(surviving) {
                *o -= dj * col[r] / n;
            }
        }

        // Blocks where the log-ratios of θ̂ differ from the score differences.
        let layout = self.layout();
        let mut rho_full = Vec::new();
        for i in 0..layout.n_blocks() {
            let range = layout.full_range(i);
            let last = range.end - 1;
            let t = theta.full_block(i);
            let q = range.len();
            let (lt, zl) = (t[q - 1].ln(), z[last]);
            let rho: Vec<f64> = (0..q - 1)
                .map(|l| (t[l].ln() - lt) + (z[range.start + l] - zl))
                .collect();
            if rho.iter().any(|r| r.abs() > CLAMP_TOL) {
                let total: f64 = rho.iter().sum();
                rho_full.extend(rho.into_iter().enumerate().map(|(l, r)| (range.start + l, r)));
                rho_full.push((last, -total));
            }
        }
        if !rho_full.is_empty() {
            let mut full = vec![0.0; d];
            for &(c, x) in &rho_full {
                let (rows, vals) = data.column(c);
                for (&r, &a) in rows.iter().zip(vals) {
                    full[r] += a * x;
                }
            }
            for (o, &r) in out.iter_mut().zip(surviving) {
                *o -= full[r] / n;
            }
        }
        Some(out)
    }
}
