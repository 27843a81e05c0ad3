//! Elementwise building blocks shared by the primal and dual objectives.

use ndarray::{Array1, ArrayView1, ArrayView2};

/// Entrywise soft-thresholding `sign(u) * max(|u| - beta, 0)`.
pub fn soft_threshold(u: ArrayView1<f64>, beta: f64) -> Array1<f64> {
    u.mapv(|x| shrink(x, beta))
}

#[inline]
pub(crate) fn shrink(x: f64, beta: f64) -> f64 {
    if x > beta {
        x - beta
    } else if x < -beta {
        x + beta
    } else {
        0.0
    }
}

/// `A ∘ θ = A[:, ..q-1] θ + (1 - Σθ) A[:, q-1]` for a `d × q` matrix and a
/// reduced simplex coordinate `θ` of length `q - 1`.
///
/// Panics when the shapes disagree.
pub fn affine_compose(a: ArrayView2<f64>, theta: ArrayView1<f64>) -> Array1<f64> {
    let q = a.ncols();
    assert!(q >= 2, "affine_compose needs at least two columns");
    assert_eq!(theta.len(), q - 1, "theta must have one entry less than A has columns");
    let head = a.slice(ndarray::s![.., ..q - 1]);
    let last = a.column(q - 1);
    let rest = 1.0 - theta.sum();
    head.dot(&theta) + &last.mapv(|x| x * rest)
}

/// `log Σ exp(z_j)` with max-subtraction.
pub fn log_partition(z: ArrayView1<f64>) -> f64 {
    log_sum_exp(z.iter().copied())
}

pub(crate) fn log_sum_exp<I>(z: I) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let max = z.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = z.map(|x| (x - max).exp()).sum();
    max + s.ln()
}

/// Entropy of a reduced simplex block: `-Σ θ_j log θ_j - (1-Σθ) log(1-Σθ)`.
///
/// Panics if the block is not strictly inside the simplex.
pub fn entropy(theta_block: ArrayView1<f64>) -> f64 {
    let rest = 1.0 - theta_block.sum();
    assert!(
        rest > 0.0 && theta_block.iter().all(|&t| t > 0.0),
        "entropy requires an interior simplex point"
    );
    simplex_entropy(theta_block.iter().copied().chain(std::iter::once(rest)))
}

/// Shannon entropy of a full probability vector whose entries are positive.
pub(crate) fn simplex_entropy<I: Iterator<Item = f64>>(probs: I) -> f64 {
    -probs.map(|p| p * p.ln()).sum::<f64>()
}

/// Writes `softmax(-z)` into `out` and returns `log Σ exp(-z_j)`.
pub(crate) fn neg_softmax_into(z: &[f64], out: &mut [f64]) -> f64 {
    let max = z.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(-x));
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(z) {
        *o = (-x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
    max + total.ln()
}
