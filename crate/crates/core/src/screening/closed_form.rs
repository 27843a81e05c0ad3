//! Exact minimum of a linear function over a ball intersected with a
//! half-space:
//!
//! ```text
//! min ⟨b, a⟩   s.t.   ⟨p, a⟩ ≤ c,   ‖a - a₀‖² ≤ r²
//! ```
//!
//! With `d = (⟨p, a₀⟩ - c) / (r‖p‖)` the signed distance of the ball center
//! to the hyperplane in units of `r`, the cases are:
//!
//! | case | condition | value |
//! |------|-----------|-------|
//! | infeasible | `d > 1` | none |
//! | ball only | `d ≤ -1` or `b = 0` | `⟨b,a₀⟩ - r‖b‖` (or `0`) |
//! | unconstrained | `⟨p,b⟩ ≥ d‖p‖‖b‖` | `⟨b,a₀⟩ - r‖b‖` |
//! | both active | `⟨p,b⟩ < d‖p‖‖b‖` | `⟨b,a₀⟩ + λ₂(⟨p,a₀⟩ - c) - r‖b + λ₂p‖` |
//! | anti-parallel | `⟨p,b⟩ = -‖p‖‖b‖` | `-c‖b‖/‖p‖` |
//!
//! In the both-active case the multiplier of the half-space is the root of
//!
//! ```text
//! (1-d²)‖p‖⁴λ² + 2(1-d²)‖p‖²⟨p,b⟩λ + ⟨p,b⟩² - d²‖p‖²‖b‖² = 0
//! ```
//!
//! whose stationarity sign matches `d`, i.e.
//! `λ₂ = (d·s/√(1-d²) - ⟨p,b⟩) / ‖p‖²` with `s² = ‖p‖²‖b‖² - ⟨p,b⟩²`. For
//! `d ≥ 0` this is the `+√Δ` root of the quadratic; for `d < 0` it is the
//! other one. The anti-parallel value is negative for positive `c`: the
//! minimizer pushes `a` as far as possible along `p`, up to the plane.

use ndarray::Array1;

/// `d` within this distance of ±1 is snapped onto ±1.
pub const BOUNDARY_SNAP: f64 = 1e-12;
/// Relative tolerance for detecting `b` anti-parallel to `p`.
pub const ANTI_PARALLEL_TOL: f64 = 1e-12;

/// Vector form of the problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormInput {
    pub b: Array1<f64>,
    pub p: Array1<f64>,
    pub c: f64,
    pub a0: Array1<f64>,
    pub r: f64,
}

impl ClosedFormInput {
    /// The inner products every case depends on.
    pub fn scalars(&self) -> ClosedFormScalars {
        assert_eq!(self.b.len(), self.p.len(), "b and p must have the same length");
        assert_eq!(self.b.len(), self.a0.len(), "b and a0 must have the same length");
        ClosedFormScalars {
            b_dot_a0: self.b.dot(&self.a0),
            b_norm: self.b.dot(&self.b).sqrt(),
            p_dot_b: self.p.dot(&self.b),
            p_norm: self.p.dot(&self.p).sqrt(),
            p_dot_a0: self.p.dot(&self.a0),
            c: self.c,
            r: self.r,
        }
    }
}

/// Sufficient statistics of a [`ClosedFormInput`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormScalars {
    pub b_dot_a0: f64,
    pub b_norm: f64,
    pub p_dot_b: f64,
    pub p_norm: f64,
    pub p_dot_a0: f64,
    pub c: f64,
    pub r: f64,
}

/// Outcome of the minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Minimum {
    Attained(f64),
    Infeasible,
}

impl Minimum {
    pub fn value(self) -> Option<f64> {
        match self {
            Minimum::Attained(v) => Some(v),
            Minimum::Infeasible => None,
        }
    }
}

/// Which branch of the case table applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClosedFormCase {
    Infeasible,
    BallOnly,
    Unconstrained,
    BothActive,
    AntiParallel,
}

impl ClosedFormCase {
    pub const ALL: [ClosedFormCase; 5] = [
        ClosedFormCase::Infeasible,
        ClosedFormCase::BallOnly,
        ClosedFormCase::Unconstrained,
        ClosedFormCase::BothActive,
        ClosedFormCase::AntiParallel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClosedFormCase::Infeasible => "infeasible",
            ClosedFormCase::BallOnly => "ball_only",
            ClosedFormCase::Unconstrained => "unconstrained",
            ClosedFormCase::BothActive => "both_active",
            ClosedFormCase::AntiParallel => "anti_parallel",
        }
    }
}

impl ClosedFormScalars {
    /// Normalized center offset `d`, snapped onto ±1 when within
    /// [`BOUNDARY_SNAP`]. `None` for a zero radius.
    pub fn offset(&self) -> Option<f64> {
        if self.r == 0.0 {
            return None;
        }
        let d = (self.p_dot_a0 - self.c) / (self.r * self.p_norm);
        Some(if (d - 1.0).abs() <= BOUNDARY_SNAP {
            1.0
        } else if (d + 1.0).abs() <= BOUNDARY_SNAP {
            -1.0
        } else {
            d
        })
    }

    pub fn classify(&self) -> ClosedFormCase {
        assert!(self.p_norm > 0.0, "p must be nonzero");
        assert!(self.r >= 0.0, "radius must be nonnegative");
        let d = match self.offset() {
            None if self.p_dot_a0 <= self.c => return ClosedFormCase::BallOnly,
            None => return ClosedFormCase::Infeasible,
            Some(d) => d,
        };
        if d > 1.0 {
            return ClosedFormCase::Infeasible;
        }
        if d <= -1.0 || self.b_norm == 0.0 {
            return ClosedFormCase::BallOnly;
        }
        let scale = self.p_norm * self.b_norm;
        if (self.p_dot_b + scale).abs() <= ANTI_PARALLEL_TOL * scale {
            ClosedFormCase::AntiParallel
        } else if self.p_dot_b >= d * scale {
            ClosedFormCase::Unconstrained
        } else {
            ClosedFormCase::BothActive
        }
    }

    pub fn minimize(&self) -> Minimum {
        let case = self.classify();
        let s = self;
        let value = match case {
            ClosedFormCase::Infeasible => return Minimum::Infeasible,
            ClosedFormCase::BallOnly if s.b_norm == 0.0 => 0.0,
            ClosedFormCase::BallOnly | ClosedFormCase::Unconstrained => {
                s.b_dot_a0 - s.r * s.b_norm
            }
            ClosedFormCase::AntiParallel => -s.c * s.b_norm / s.p_norm,
            ClosedFormCase::BothActive => {
                let d = self.offset().expect("positive radius");
                // Components of b along and across p.
                let along = s.p_dot_b / s.p_norm;
                let across = (s.b_norm * s.b_norm - along * along).max(0.0).sqrt();
                if d == 1.0 {
                    // Tangent plane: the feasible set is the single point a₀ - r p/‖p‖.
                    s.b_dot_a0 - s.r * along
                } else {
                    let lambda = (d * across / (1.0 - d * d).sqrt() - along) / s.p_norm;
                    let shifted = (along + lambda * s.p_norm).hypot(across);
                    s.b_dot_a0 + lambda * (s.p_dot_a0 - s.c) - s.r * shifted
                }
            }
        };
        Minimum::Attained(value)
    }
}

/// Exact minimum of `⟨b, a⟩` over `{a : ⟨p, a⟩ ≤ c, ‖a - a₀‖ ≤ r}`.
pub fn min_linear_ball_halfspace(inp: &ClosedFormInput) -> Minimum {
    inp.scalars().minimize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn input(b: [f64; 2], p: [f64; 2], c: f64, a0: [f64; 2], r: f64) -> ClosedFormInput {
        ClosedFormInput {
            b: Array1::from(b.to_vec()),
            p: Array1::from(p.to_vec()),
            c,
            a0: Array1::from(a0.to_vec()),
            r,
        }
    }

    #[test]
    fn disk_below_axis() {
        let inp = input([1.0, 0.0], [0.0, 1.0], 0.0, [0.0, 0.0], 1.0);
        assert_eq!(min_linear_ball_halfspace(&inp), Minimum::Attained(-1.0));
    }

    #[test]
    fn capped_disk_anti_parallel() {
        let inp = input([0.0, -1.0], [0.0, 1.0], 0.5, [0.0, 0.0], 1.0);
        assert_eq!(inp.scalars().classify(), ClosedFormCase::AntiParallel);
        assert_eq!(min_linear_ball_halfspace(&inp), Minimum::Attained(-0.5));
    }

    #[test]
    fn both_constraints_active() {
        let inp = input([1.0, 0.0], [0.0, 1.0], -0.5, [0.0, 0.0], 1.0);
        assert_eq!(inp.scalars().classify(), ClosedFormCase::BothActive);
        let v = min_linear_ball_halfspace(&inp).value().unwrap();
        assert!((v + 0.75f64.sqrt()).abs() < 1e-12);
        // The λ₂ of this instance.
        let lambda: f64 = 0.75f64.sqrt() / 1.5;
        assert!((lambda * 0.5 - (1.0 + lambda * lambda).sqrt() - v).abs() < 1e-12);
    }

    #[test]
    fn negative_offset_uses_other_root() {
        // Center above the plane's far side: d = -0.5, b slanted against p.
        let inp = input([0.6, -0.8], [0.0, 1.0], 0.5, [0.0, 0.0], 1.0);
        assert_eq!(inp.scalars().classify(), ClosedFormCase::BothActive);
        // Minimizer is the chord endpoint (−√0.75, 0.5).
        let expected = -0.6 * 0.75f64.sqrt() - 0.8 * 0.5;
        let v = min_linear_ball_halfspace(&inp).value().unwrap();
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
    }

    #[test]
    fn infeasible_and_degenerate_inputs() {
        let inp = input([1.0, 0.0], [0.0, 1.0], -2.0, [0.0, 0.0], 1.0);
        assert_eq!(min_linear_ball_halfspace(&inp), Minimum::Infeasible);
        let zero_b = input([0.0, 0.0], [0.0, 1.0], 0.0, [3.0, 0.0], 1.0);
        assert_eq!(min_linear_ball_halfspace(&zero_b), Minimum::Attained(0.0));
        let point = input([2.0, 1.0], [0.0, 1.0], 1.0, [1.0, 0.5], 0.0);
        assert_eq!(min_linear_ball_halfspace(&point), Minimum::Attained(2.5));
        let point_out = input([2.0, 1.0], [0.0, 1.0], 0.0, [1.0, 0.5], 0.0);
        assert_eq!(min_linear_ball_halfspace(&point_out), Minimum::Infeasible);
        let far = input([1.0, 1.0], [0.0, 1.0], 5.0, [0.0, 0.0], 1.0);
        assert_eq!(far.scalars().classify(), ClosedFormCase::BallOnly);
        assert!((min_linear_ball_halfspace(&far).value().unwrap() + 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tangent_plane_is_a_single_point() {
        // d = 1: only a₀ - r p̂ = (0, -1) is feasible.
        let inp = input([1.0, 2.0], [0.0, 1.0], -1.0, [0.0, 0.0], 1.0);
        assert_eq!(min_linear_ball_halfspace(&inp), Minimum::Attained(-2.0));
        let par = ClosedFormInput {
            b: array![0.0, 3.0],
            ..inp
        };
        assert_eq!(min_linear_ball_halfspace(&par), Minimum::Attained(-3.0));
    }
}
