//! Feature screening over the dual estimate.
//!
//! Feature `j` is provably zero at the optimum when
//! `max_{θ ∈ Θ} |⟨b_j, θ⟩ + c_j| ≤ β`, where `⟨b_j, θ⟩ + c_j` is the `j`-th
//! entry of `(1/n) Σ_i A_i ∘ θ_i`. The maximum over `Θ` is relaxed to the
//! maximum over `B ∩ H_k` for one sample `k` (or the minimum of those over
//! all `k`), and each side of the absolute value is a
//! [`min_linear_ball_halfspace`] problem with `p` the indicator of block `k`
//! and `c = 1`.

mod closed_form;

pub use closed_form::{
    min_linear_ball_halfspace, ClosedFormCase, ClosedFormInput, ClosedFormScalars, Minimum,
    ANTI_PARALLEL_TOL, BOUNDARY_SNAP,
};

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::estimation::BallEstimate;
use crate::model::{for_each_sample_run, BlockLayout, BlockVector, ProblemView};

/// Features are screened when `ŝ_j ≤ β - SCREEN_SLACK`.
pub const SCREEN_SLACK: f64 = 1e-10;

/// Affine form `θ ↦ ⟨b, θ⟩ + offset` of one entry of `(1/n) Σ_i A_i ∘ θ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCoefficient {
    pub b: BlockVector,
    pub offset: f64,
}

impl FeatureCoefficient {
    pub fn eval(&self, theta: &BlockVector) -> f64 {
        self.b.dot(theta) + self.offset
    }
}

/// Which samples' half-spaces a screening pass uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleChoice {
    /// `B ∩ H_k` for one `k`.
    Single(usize),
    /// `min_k` over all samples.
    All,
}

/// Scores of one screening pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningOutcome {
    /// `(feature, ŝ_j)` for every surviving feature, ascending by feature.
    pub scores: Vec<(usize, f64)>,
    /// Features with `ŝ_j ≤ β - SCREEN_SLACK`.
    pub newly_screened: Vec<usize>,
}

fn local_index(view: &ProblemView<'_>, j: usize) -> Result<usize> {
    view.active()
        .surviving()
        .binary_search(&j)
        .map_err(|_| Error::FeatureIndex(j))
}

/// Builds `b_j` and `c_j` for surviving feature `j` (global index).
pub fn feature_coefficient(view: &ProblemView<'_>, j: usize) -> Result<FeatureCoefficient> {
    let local = local_index(view, j)?;
    let layout = view.layout().clone();
    let n = view.n_samples() as f64;
    let (idx, val) = view.matrix().row(local);
    let mut b = Array1::zeros(layout.reduced_len());
    let mut offset = 0.0;
    for_each_sample_run(idx, &layout, |i, lo, hi| {
        let full = layout.full_range(i);
        let mut row = vec![0.0; full.len()];
        for k in lo..hi {
            row[idx[k] - full.start] = val[k];
        }
        let last = *row.last().unwrap();
        for (l, out) in layout.reduced_range(i).enumerate() {
            b[out] = (row[l] - last) / n;
        }
        offset += last / n;
    });
    Ok(FeatureCoefficient {
        b: BlockVector::new(layout, b)?,
        offset,
    })
}

/// `n ⟨p_k, b_j⟩` from the stored entries of one sample's slice of a row.
fn block_sum(idx: &[usize], val: &[f64], layout: &BlockLayout, k: usize) -> f64 {
    let full = layout.full_range(k);
    let lo = idx.partition_point(|&c| c < full.start);
    let hi = idx.partition_point(|&c| c < full.end);
    run_sum(&idx[lo..hi], &val[lo..hi], full)
}

fn run_sum(idx: &[usize], val: &[f64], full: std::ops::Range<usize>) -> f64 {
    let q = full.len();
    let mut head = 0.0;
    let mut last = 0.0;
    for (&c, &v) in idx.iter().zip(val) {
        if c + 1 == full.end {
            last = v;
        } else {
            head += v;
        }
    }
    head - (q - 1) as f64 * last
}

/// Per-ball quantities shared by every feature.
struct BallContext {
    radius: f64,
    /// `‖p_k‖ = sqrt(|Y_k| - 1)`.
    p_norm: Vec<f64>,
    /// `⟨p_k, a₀⟩`, the block sums of the center.
    p_dot_a0: Vec<f64>,
}

impl BallContext {
    fn new(ball: &BallEstimate) -> Self {
        let layout = ball.center.layout();
        BallContext {
            radius: ball.radius(),
            p_norm: layout.sizes().iter().map(|&q| ((q - 1) as f64).sqrt()).collect(),
            p_dot_a0: (0..layout.n_blocks()).map(|k| ball.center.block(k).sum()).collect(),
        }
    }

    /// `s_{j,k}` given `u = ⟨b_j, a₀⟩ + c_j`, `c_j`, `‖b_j‖` and `⟨p_k, b_j⟩`.
    fn score(&self, k: usize, affine_at_center: f64, offset: f64, b_norm: f64, p_dot_b: f64) -> f64 {
        let b_dot_a0 = affine_at_center - offset;
        let side = |sign: f64| {
            ClosedFormScalars {
                b_dot_a0: sign * b_dot_a0,
                b_norm,
                p_dot_b: sign * p_dot_b,
                p_norm: self.p_norm[k],
                p_dot_a0: self.p_dot_a0[k],
                c: 1.0,
                r: self.radius,
            }
            .minimize()
        };
        match (side(-1.0), side(1.0)) {
            (Minimum::Attained(u), Minimum::Attained(l)) => (offset - u).max(-offset - l),
            // An empty region certifies nothing; keep the feature.
            _ => f64::INFINITY,
        }
    }
}

/// `s_{j,k} = max(s⁺, s⁻)`, the largest `|⟨b_j, θ⟩ + c_j|` over `B ∩ H_k`.
pub fn score_feature(
    view: &ProblemView<'_>,
    j: usize,
    ball: &BallEstimate,
    k: usize,
) -> Result<f64> {
    let local = local_index(view, j)?;
    if k >= view.n_samples() {
        return Err(Error::InvalidData(format!("sample index {k} out of range")));
    }
    let n = view.n_samples() as f64;
    let center = ball.center.extend_affine();
    let (idx, val) = view.matrix().row(local);
    let affine: f64 = idx.iter().zip(val).map(|(&c, &v)| v * center[c]).sum::<f64>() / n;
    let data = view.data();
    let p_dot_b = block_sum(idx, val, view.layout(), k) / n;
    Ok(BallContext::new(ball).score(
        k,
        affine,
        data.coef_offset[j],
        data.coef_norm_sq[j].sqrt(),
        p_dot_b,
    ))
}

/// Samples grouped by `|Y_k|`, each group sorted by decreasing `⟨p_k, a₀⟩`.
///
/// For a feature whose row has no entries in sample `k`, `⟨p_k, b_j⟩ = 0`
/// and `s_{j,k}` depends on `k` only through `|Y_k|` and `⟨p_k, a₀⟩`. A
/// larger `⟨p_k, a₀⟩` pushes the half-space further into the ball, which
/// can only shrink the feasible set and hence the score, so within a group
/// the first untouched sample with a finite score attains the minimum.
fn untouched_order(ctx: &BallContext, layout: &BlockLayout) -> Vec<Vec<usize>> {
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for (k, &q) in layout.sizes().iter().enumerate() {
        match groups.iter_mut().find(|(size, _)| *size == q) {
            Some((_, g)) => g.push(k),
            None => groups.push((q, vec![k])),
        }
    }
    groups
        .into_iter()
        .map(|(_, mut g)| {
            g.sort_by(|&a, &b| ctx.p_dot_a0[b].total_cmp(&ctx.p_dot_a0[a]).then(a.cmp(&b)));
            g
        })
        .collect()
}

/// Scores every surviving feature and collects those certified zero at `beta`.
pub fn screen(
    view: &ProblemView<'_>,
    ball: &BallEstimate,
    beta: f64,
    choice: SampleChoice,
) -> ScreeningOutcome {
    screen_impl(view, ball, beta, choice, None)
}

/// [`screen`] with `affine[r] = ⟨b_j, a₀⟩ + c_j` for the `r`-th surviving
/// feature `j` already computed, typically alongside another pass over `M`.
pub fn screen_with_affine(
    view: &ProblemView<'_>,
    ball: &BallEstimate,
    beta: f64,
    choice: SampleChoice,
    affine: &Array1<f64>,
) -> ScreeningOutcome {
    assert_eq!(affine.len(), view.n_surviving(), "affine length");
    screen_impl(view, ball, beta, choice, Some(affine))
}

fn screen_impl(
    view: &ProblemView<'_>,
    ball: &BallEstimate,
    beta: f64,
    choice: SampleChoice,
    affine: Option<&Array1<f64>>,
) -> ScreeningOutcome {
    let layout = view.layout();
    let n = view.n_samples();
    let nf = n as f64;
    let data = view.data();
    let center = ball.center.extend_affine();
    let ctx = BallContext::new(ball);
    let threshold = beta - SCREEN_SLACK;
    let mut scores = Vec::with_capacity(view.n_surviving());
    let mut newly_screened = Vec::new();
    let mut single_sums = Vec::new();
    let mut groups = Vec::new();
    let mut touched = Vec::new();
    match choice {
        SampleChoice::Single(k) => {
            single_sums = vec![0.0; data.n_features()];
            data.sample_sums_into(k, &mut single_sums);
        }
        SampleChoice::All => {
            groups = untouched_order(&ctx, layout);
            touched = vec![usize::MAX; n];
        }
    }
    let affine_at = |local: usize| match affine {
        Some(a) => a[local],
        None => {
            let (idx, val) = view.matrix().row(local);
            idx.iter().zip(val).map(|(&c, &v)| v * center[c]).sum::<f64>() / nf
        }
    };
    for (local, &j) in view.active().surviving().iter().enumerate() {
        let offset = data.coef_offset[j];
        let b_norm = data.coef_norm_sq[j].sqrt();
        let score = match choice {
            SampleChoice::Single(k) => {
                ctx.score(k, affine_at(local), offset, b_norm, single_sums[j] / nf)
            }
            SampleChoice::All => {
                let (idx, val) = view.matrix().row(local);
                let affine = affine_at(local);
                let mut best = f64::INFINITY;
                for_each_sample_run(idx, layout, |k, lo, hi| {
                    touched[k] = local;
                    let p_dot_b = run_sum(&idx[lo..hi], &val[lo..hi], layout.full_range(k)) / nf;
                    best = best.min(ctx.score(k, affine, offset, b_norm, p_dot_b));
                });
                for group in &groups {
                    for &k in group.iter().filter(|&&k| touched[k] != local) {
                        let s = ctx.score(k, affine, offset, b_norm, 0.0);
                        best = best.min(s);
                        if s.is_finite() {
                            break;
                        }
                    }
                }
                best
            }
        };
        if score <= threshold {
            newly_screened.push(j);
        }
        scores.push((j, score));
    }
    ScreeningOutcome {
        scores,
        newly_screened,
    }
}
