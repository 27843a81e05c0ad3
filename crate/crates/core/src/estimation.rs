//! Region `Θ = B ∩ H_1 ∩ … ∩ H_n` guaranteed to contain the dual optimum.
//!
//! The dual objective is `1/n`-strongly convex, so for any feasible `θ̂` and
//! any feasible `θ̂₂`
//!
//! ```text
//! ‖θ* - (θ̂ - n∇D̂(θ̂))‖² ≤ n²‖∇D̂(θ̂)‖² - 2n D̂(θ̂) + 2n D̂(θ̂₂)
//! ```
//!
//! The unknown `D̂(θ*)` appears with opposite signs in the two terms this
//! bound is assembled from, which is why only `D̂(θ̂₂)` is needed. Each
//! half-space `H_k = {θ : ⟨θ_k, 1⟩ ≤ 1}` comes from simplex feasibility.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::model::{BlockVector, DualPoint, ProblemView};

/// Below this the radius is considered corrupted rather than rounded.
pub const RADIUS_GUARD: f64 = -1e-8;

/// Slack used by [`region_contains`].
pub const CONTAINMENT_SLACK: f64 = 1e-10;

/// Ball `B` of the dual estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct BallEstimate {
    pub center: BlockVector,
    pub radius_sq: f64,
}

impl BallEstimate {
    pub fn radius(&self) -> f64 {
        self.radius_sq.sqrt()
    }
}

/// `H_k = {θ : ⟨θ_k, 1⟩ ≤ 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfSpace {
    pub block: usize,
}

impl HalfSpace {
    pub const BOUND: f64 = 1.0;

    pub fn contains(&self, point: &BlockVector, slack: f64) -> bool {
        point.block(self.block).sum() <= Self::BOUND + slack
    }
}

/// Builds the ball from `theta_hat` and the lowest dual value seen at any
/// feasible point of the same view.
pub fn ball_estimate(
    view: &ProblemView<'_>,
    theta_hat: &DualPoint,
    best_dual_value: f64,
) -> Result<BallEstimate> {
    let v = view.feature_sum(theta_hat.full().as_slice().unwrap());
    let value = view.dual_objective_with(theta_hat, &v);
    ball_estimate_with(view, theta_hat, &v, value, best_dual_value)
}

/// Same as [`ball_estimate`] with `v = (1/n) Σ A_i ∘ θ̂_i` and `D̂(θ̂)` already
/// computed.
pub(crate) fn ball_estimate_with(
    view: &ProblemView<'_>,
    theta_hat: &DualPoint,
    v: &Array1<f64>,
    dual_value: f64,
    best_dual_value: f64,
) -> Result<BallEstimate> {
    let n = view.n_samples() as f64;
    let grad = view.dual_gradient_with(theta_hat, v);
    let best = best_dual_value.min(dual_value);
    let radius_sq = n * n * grad.norm_sq() - 2.0 * n * (dual_value - best);
    if radius_sq < RADIUS_GUARD {
        return Err(Error::NegativeRadius(radius_sq));
    }
    let mut center = theta_hat.reduced();
    center.values_mut().scaled_add(-n, grad.values());
    Ok(BallEstimate {
        center,
        radius_sq: radius_sq.max(0.0),
    })
}

/// Whether `point` lies in `B ∩ H_1 ∩ … ∩ H_n` up to [`CONTAINMENT_SLACK`].
pub fn region_contains(ball: &BallEstimate, point: &BlockVector) -> bool {
    assert_eq!(
        ball.center.values().len(),
        point.values().len(),
        "point shape must match the ball"
    );
    let dist_sq: f64 = ball
        .center
        .values()
        .iter()
        .zip(point.values())
        .map(|(c, p)| (c - p) * (c - p))
        .sum();
    dist_sq <= ball.radius_sq + CONTAINMENT_SLACK
        && (0..point.n_blocks()).all(|k| HalfSpace { block: k }.contains(point, CONTAINMENT_SLACK))
}
